#include "fcfuzz/fcm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fcfuzz {

FcmResult fcm_cluster(const Mat& data, int clusters, double fuzzifier,
                      double tol, int max_iter, Rng& rng) {
  const int n = data.rows;
  const int d = data.cols;
  if (clusters < 1) throw ValidationError("fcm: need at least one cluster");
  if (n < clusters)
    throw ValidationError("fcm: " + std::to_string(n) + " points for " +
                          std::to_string(clusters) + " clusters");
  if (!(fuzzifier > 1.0)) throw ValidationError("fcm: fuzzifier must be > 1");

  FcmResult res;
  res.fuzzifier = fuzzifier;
  res.centers = Mat(clusters, d);
  res.memberships = Mat(n, clusters);

  // init: distinct random data points
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < clusters; ++i) {
    std::swap(perm[i], perm[i + rng.uniform_int(n - i)]);
    for (int j = 0; j < d; ++j) res.centers(i, j) = data(perm[i], j);
  }

  const double exponent = 1.0 / (fuzzifier - 1.0);
  std::vector<double> dist2(clusters);
  Mat new_centers(clusters, d);
  std::vector<double> weight_sum(clusters);

  for (int iter = 1; iter <= max_iter; ++iter) {
    res.iterations = iter;
    // membership update
    for (int i = 0; i < n; ++i) {
      int coincident = 0;
      for (int r = 0; r < clusters; ++r) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
          const double diff = data(i, j) - res.centers(r, j);
          s += diff * diff;
        }
        dist2[r] = s;
        if (s == 0.0) ++coincident;
      }
      if (coincident > 0) {
        // crisp membership, split across every center the point sits on
        for (int r = 0; r < clusters; ++r)
          res.memberships(i, r) = (dist2[r] == 0.0) ? 1.0 / coincident : 0.0;
        continue;
      }
      for (int r = 0; r < clusters; ++r) {
        double denom = 0.0;
        for (int s = 0; s < clusters; ++s)
          denom += std::pow(dist2[r] / dist2[s], exponent);
        res.memberships(i, r) = 1.0 / denom;
      }
    }
    // center update
    std::fill(new_centers.v.begin(), new_centers.v.end(), 0.0);
    std::fill(weight_sum.begin(), weight_sum.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int r = 0; r < clusters; ++r) {
        const double w = std::pow(res.memberships(i, r), fuzzifier);
        weight_sum[r] += w;
        for (int j = 0; j < d; ++j) new_centers(r, j) += w * data(i, j);
      }
    }
    double max_move = 0.0;
    for (int r = 0; r < clusters; ++r) {
      if (weight_sum[r] <= 0.0)
        throw Error("fcm: cluster " + std::to_string(r) + " collapsed to zero weight");
      for (int j = 0; j < d; ++j) {
        const double c = new_centers(r, j) / weight_sum[r];
        max_move = std::max(max_move, std::fabs(c - res.centers(r, j)));
        res.centers(r, j) = c;
      }
    }
    if (max_move < tol) break;
  }

  res.final_objective = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < clusters; ++r) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) {
        const double diff = data(i, j) - res.centers(r, j);
        s += diff * diff;
      }
      res.final_objective += std::pow(res.memberships(i, r), fuzzifier) * s;
    }
  }
  return res;
}

double mf_eval(const GaussianMF& mf, double x) {
  const double z = (x - mf.mean) / mf.sigma;
  return std::exp(-0.5 * z * z);
}

double mf_log_eval(const GaussianMF& mf, double x) {
  const double z = (x - mf.mean) / mf.sigma;
  return -0.5 * z * z;
}

std::pair<double, double> mf_eval(const IT2GaussianMF& mf, double x) {
  const auto [ll, lu] = mf_log_eval(mf, x);
  return {std::exp(ll), std::exp(lu)};
}

std::pair<double, double> mf_log_eval(const IT2GaussianMF& mf, double x) {
  const double z1 = (x - mf.mean) / mf.sigma1;
  const double z2 = (x - mf.mean) / mf.sigma2;
  return {-0.5 * z1 * z1, -0.5 * z2 * z2};
}

std::vector<std::vector<IT2GaussianMF>> derive_mfs(const FcmResult& result,
                                                   const Mat& data,
                                                   double it2_delta) {
  if (!(it2_delta >= 0.0 && it2_delta < 1.0))
    throw ValidationError("derive_mfs: delta must be in [0, 1)");
  const int clusters = result.centers.rows;
  const int d = result.centers.cols;
  const int n = data.rows;
  if (data.cols != d || result.memberships.rows != n)
    throw ValidationError("derive_mfs: shape mismatch");

  std::vector<double> floor_sigma(d);
  for (int j = 0; j < d; ++j) {
    double lo = data(0, j), hi = data(0, j);
    for (int i = 1; i < n; ++i) {
      lo = std::min(lo, data(i, j));
      hi = std::max(hi, data(i, j));
    }
    const double range = hi - lo;
    floor_sigma[j] = 1e-6 * (range > 0.0 ? range : 1.0);
  }

  std::vector<std::vector<IT2GaussianMF>> mfs(clusters);
  for (int r = 0; r < clusters; ++r) {
    mfs[r].resize(d);
    std::vector<double> weights(n);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      weights[i] = std::pow(result.memberships(i, r), result.fuzzifier);
      wsum += weights[i];
    }
    for (int j = 0; j < d; ++j) {
      const double mean = result.centers(r, j);
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const double diff = data(i, j) - mean;
        var += weights[i] * diff * diff;
      }
      var = (wsum > 0.0) ? var / wsum : 0.0;
      double sigma = std::sqrt(var);
      sigma = std::max(sigma, floor_sigma[j]);
      mfs[r][j] = {mean, sigma * (1.0 - it2_delta), sigma * (1.0 + it2_delta)};
    }
  }
  return mfs;
}

}  // namespace fcfuzz
