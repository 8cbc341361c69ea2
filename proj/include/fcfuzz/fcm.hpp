#pragma once

#include <utility>
#include <vector>

#include "fcfuzz/common.hpp"
#include "fcfuzz/matrix.hpp"

namespace fcfuzz {

struct FcmResult {
  Mat centers;      // M x d
  Mat memberships;  // N x M, rows sum to 1
  double fuzzifier = 2.0;
  int iterations = 0;
  double final_objective = 0.0;
};

// Standard fuzzy c-means. Initial centers are M distinct data points drawn
// from rng; stops when the largest center movement drops below tol. A data
// point coinciding with a center gets crisp membership there.
FcmResult fcm_cluster(const Mat& data, int clusters, double fuzzifier,
                      double tol, int max_iter, Rng& rng);

struct GaussianMF {
  double mean = 0.0;
  double sigma = 1.0;
};

// Gaussian with fixed mean and uncertain sigma in [sigma1, sigma2]:
// the lower membership uses sigma1, the upper uses sigma2.
struct IT2GaussianMF {
  double mean = 0.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
};

double mf_eval(const GaussianMF& mf, double x);
std::pair<double, double> mf_eval(const IT2GaussianMF& mf, double x);  // (lower, upper)

// Log-domain evaluations; used where products over hundreds of dimensions
// would underflow.
double mf_log_eval(const GaussianMF& mf, double x);
std::pair<double, double> mf_log_eval(const IT2GaussianMF& mf, double x);

// Per-rule, per-dimension MFs: mean = cluster-center coordinate, sigma =
// u^m-weighted standard deviation within the cluster, floored at 1e-6 of the
// dimension's data range (1e-6 absolute when the range is zero).
// sigma1 = sigma*(1-delta), sigma2 = sigma*(1+delta); delta = 0 collapses to
// type-1.
std::vector<std::vector<IT2GaussianMF>> derive_mfs(const FcmResult& result,
                                                   const Mat& data,
                                                   double it2_delta);

}  // namespace fcfuzz
