#include "fcfuzz/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fcfuzz/common.hpp"

namespace fcfuzz {

namespace {

constexpr double kTol = 1e-12;
constexpr int kMaxIter = 500;
constexpr double kTiny = 1e-300;

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kTol) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ValidationError("incomplete beta: a and b must be positive");
  if (x < 0.0 || x > 1.0)
    throw ValidationError("incomplete beta: x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0))
    return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double regularized_gamma_p(double s, double x) {
  if (!(s > 0.0)) throw ValidationError("incomplete gamma: s must be positive");
  if (x < 0.0) throw ValidationError("incomplete gamma: x must be non-negative");
  if (x == 0.0) return 0.0;
  const double ln_pref = -x + s * std::log(x) - std::lgamma(s);
  if (x < s + 1.0) {
    // series for P
    double term = 1.0 / s;
    double sum = term;
    for (int n = 1; n <= kMaxIter; ++n) {
      term *= x / (s + n);
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * kTol)
        return sum * std::exp(ln_pref);
    }
    throw Error("incomplete gamma series did not converge");
  }
  // continued fraction for Q (modified Lentz)
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kTol)
      return 1.0 - h * std::exp(ln_pref);
  }
  throw Error("incomplete gamma continued fraction did not converge");
}

double regularized_gamma_q(double s, double x) {
  return 1.0 - regularized_gamma_p(s, x);
}

double f_distribution_sf(double f, int df1, int df2) {
  if (df1 < 1 || df2 < 1)
    throw ValidationError("F survival: degrees of freedom must be positive");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double x = df2 / (df2 + df1 * f);
  return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x);
}

double chi_square_sf(double x, int df) {
  if (df < 1)
    throw ValidationError("chi-square survival: df must be positive");
  if (x <= 0.0) return 1.0;
  return regularized_gamma_q(df / 2.0, x / 2.0);
}

AnovaResult one_way_anova(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2)
    throw ValidationError("one_way_anova: need at least 2 groups");
  size_t n_total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2)
      throw ValidationError("one_way_anova: every group needs at least 2 samples");
    n_total += g.size();
  }
  double grand = 0.0;
  std::vector<double> means(groups.size());
  for (size_t k = 0; k < groups.size(); ++k) {
    double s = 0.0;
    for (double v : groups[k]) s += v;
    means[k] = s / static_cast<double>(groups[k].size());
    grand += s;
  }
  grand /= static_cast<double>(n_total);

  double ss_between = 0.0, ss_within = 0.0;
  for (size_t k = 0; k < groups.size(); ++k) {
    const double dm = means[k] - grand;
    ss_between += static_cast<double>(groups[k].size()) * dm * dm;
    for (double v : groups[k]) {
      const double d = v - means[k];
      ss_within += d * d;
    }
  }
  AnovaResult res;
  res.df_between = static_cast<int>(groups.size()) - 1;
  res.df_within = static_cast<int>(n_total - groups.size());
  const double ms_between = ss_between / res.df_between;
  const double ms_within = ss_within / res.df_within;
  if (ms_within == 0.0) {
    if (ms_between == 0.0) {
      res.f_stat = 0.0;
      res.p_value = 1.0;
    } else {
      res.f_stat = std::numeric_limits<double>::infinity();
      res.p_value = 0.0;
    }
    return res;
  }
  res.f_stat = ms_between / ms_within;
  res.p_value = f_distribution_sf(res.f_stat, res.df_between, res.df_within);
  return res;
}

ChiSquareResult chi_square_independence(const Mat& counts) {
  if (counts.rows < 2 || counts.cols < 2)
    throw ValidationError("chi_square_independence: table must be at least 2x2");
  std::vector<double> row_sum(counts.rows, 0.0), col_sum(counts.cols, 0.0);
  double total = 0.0;
  for (int i = 0; i < counts.rows; ++i) {
    for (int j = 0; j < counts.cols; ++j) {
      const double c = counts(i, j);
      if (c < 0.0 || !std::isfinite(c))
        throw ValidationError("chi_square_independence: counts must be non-negative");
      row_sum[i] += c;
      col_sum[j] += c;
      total += c;
    }
  }
  for (int i = 0; i < counts.rows; ++i)
    if (row_sum[i] == 0.0)
      throw ValidationError("chi_square_independence: row " + std::to_string(i) +
                            " has zero marginal");
  for (int j = 0; j < counts.cols; ++j)
    if (col_sum[j] == 0.0)
      throw ValidationError("chi_square_independence: column " + std::to_string(j) +
                            " has zero marginal");
  ChiSquareResult res;
  res.df = (counts.rows - 1) * (counts.cols - 1);
  for (int i = 0; i < counts.rows; ++i) {
    for (int j = 0; j < counts.cols; ++j) {
      const double expected = row_sum[i] * col_sum[j] / total;
      const double d = counts(i, j) - expected;
      res.statistic += d * d / expected;
    }
  }
  res.p_value = chi_square_sf(res.statistic, res.df);
  return res;
}

std::vector<EdgeStat> edge_screen(std::span<const ConnectivityMatrix> matrices,
                                  std::span<const ClassLabel> labels,
                                  double alpha) {
  if (matrices.size() != labels.size())
    throw ValidationError("edge_screen: matrices/labels size mismatch");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ValidationError("edge_screen: alpha must be in (0, 1]");
  if (matrices.empty()) throw ValidationError("edge_screen: no matrices");
  const int r = matrices.front().values.rows;
  for (const auto& m : matrices)
    if (m.values.rows != r || m.values.cols != r)
      throw ValidationError("edge_screen: subject '" + m.subject_id +
                            "' has mismatched matrix size");
  std::array<std::vector<size_t>, kNumClasses> members;
  for (size_t i = 0; i < labels.size(); ++i)
    members[static_cast<int>(labels[i])].push_back(i);
  for (int c = 0; c < kNumClasses; ++c)
    if (members[c].size() < 2)
      throw ValidationError(std::string("edge_screen: class ") +
                            to_string(static_cast<ClassLabel>(c)) +
                            " has fewer than 2 samples");

  std::vector<EdgeStat> hits;
  std::vector<std::vector<double>> groups(kNumClasses);
  for (int i = 0; i < r; ++i) {
    for (int j = i + 1; j < r; ++j) {
      for (int c = 0; c < kNumClasses; ++c) {
        groups[c].clear();
        for (size_t s : members[c]) groups[c].push_back(matrices[s].values(i, j));
        // canonical summation order, so results do not depend on subject order
        std::sort(groups[c].begin(), groups[c].end());
      }
      const AnovaResult a = one_way_anova(groups);
      if (a.p_value < alpha) hits.push_back({i, j, a.f_stat, a.p_value});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const EdgeStat& a, const EdgeStat& b) {
    if (a.p_value != b.p_value) return a.p_value < b.p_value;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  return hits;
}

}  // namespace fcfuzz
