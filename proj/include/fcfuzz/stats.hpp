#pragma once

#include <span>
#include <vector>

#include "fcfuzz/connectivity.hpp"
#include "fcfuzz/data_model.hpp"
#include "fcfuzz/matrix.hpp"

namespace fcfuzz {

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz),
// tolerance 1e-12, 500-iteration cap.
double regularized_incomplete_beta(double a, double b, double x);

// Regularized incomplete gamma: P(s, x) lower, Q(s, x) = 1 - P upper.
double regularized_gamma_p(double s, double x);
double regularized_gamma_q(double s, double x);

// Survival functions built on the above.
double f_distribution_sf(double f, int df1, int df2);
double chi_square_sf(double x, int df);

struct AnovaResult {
  double f_stat = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p_value = 1.0;
};

// One-way fixed-effects ANOVA. Zero within- and between-group variance
// yields F = 0, p = 1; zero within with nonzero between yields F = inf, p = 0.
AnovaResult one_way_anova(std::span<const std::vector<double>> groups);

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

// Pearson chi-square test of independence on a contingency table of counts.
ChiSquareResult chi_square_independence(const Mat& counts);

struct EdgeStat {
  int i = 0;
  int j = 0;
  double f_stat = 0.0;
  double p_value = 1.0;
};

// Per-edge one-way ANOVA across the three label groups over the upper
// triangle; returns edges with p < alpha sorted ascending by p. Output is
// independent of subject ordering.
std::vector<EdgeStat> edge_screen(std::span<const ConnectivityMatrix> matrices,
                                  std::span<const ClassLabel> labels,
                                  double alpha);

}  // namespace fcfuzz
