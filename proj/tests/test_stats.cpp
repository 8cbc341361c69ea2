#include <doctest.h>

#include <cmath>

#include "fcfuzz/common.hpp"
#include "fcfuzz/stats.hpp"
#include "oracles.hpp"

using namespace fcfuzz;

TEST_SUITE("stats") {

TEST_CASE("incomplete beta matches closed forms to 1e-10") {
  for (double x : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) {
    CHECK(regularized_incomplete_beta(1, 1, x) == doctest::Approx(x).epsilon(1e-10));
    CHECK(regularized_incomplete_beta(2, 1, x) ==
          doctest::Approx(x * x).epsilon(1e-10));
    CHECK(regularized_incomplete_beta(1, 3, x) ==
          doctest::Approx(1.0 - std::pow(1.0 - x, 3)).epsilon(1e-10));
    CHECK(regularized_incomplete_beta(0.5, 0.5, x) ==
          doctest::Approx(2.0 / M_PI * std::asin(std::sqrt(x))).epsilon(1e-10));
  }
}

TEST_CASE("incomplete beta symmetry and monotonicity") {
  for (double a : {0.5, 1.5, 4.0})
    for (double b : {0.7, 2.0, 9.0}) {
      double prev = -1.0;
      for (double x = 0.05; x < 1.0; x += 0.05) {
        const double v = regularized_incomplete_beta(a, b, x);
        CHECK(v >= prev);
        prev = v;
        const double sym = 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);
        CHECK(v == doctest::Approx(sym).epsilon(1e-10));
      }
    }
}

TEST_CASE("incomplete gamma matches closed forms to 1e-10") {
  for (double x : {0.1, 0.5, 1.0, 2.5, 7.0, 20.0}) {
    CHECK(regularized_gamma_q(1.0, x) == doctest::Approx(std::exp(-x)).epsilon(1e-10));
    CHECK(regularized_gamma_q(2.0, x) ==
          doctest::Approx(std::exp(-x) * (1.0 + x)).epsilon(1e-10));
    CHECK(regularized_gamma_q(0.5, x) ==
          doctest::Approx(std::erfc(std::sqrt(x))).epsilon(1e-10));
    CHECK(regularized_gamma_p(1.7, x) + regularized_gamma_q(1.7, x) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("anova: identical groups give F=0, p=1") {
  const std::vector<std::vector<double>> groups{{1, 2, 3}, {1, 2, 3}};
  const AnovaResult res = one_way_anova(groups);
  CHECK(res.f_stat == 0.0);
  CHECK(res.p_value == 1.0);
}

TEST_CASE("anova: separated groups give a vanishing p") {
  const std::vector<std::vector<double>> groups{{1, 2, 3}, {101, 102, 103}};
  const AnovaResult res = one_way_anova(groups);
  CHECK(res.f_stat > 1e4);
  CHECK(res.p_value < 1e-6);
}

TEST_CASE("anova: hand-assembled table oracle with closed-form p") {
  const std::vector<std::vector<double>> groups{{3, 1, 2}, {5, 3, 4}, {5, 6, 7}};
  const auto table = oracles::anova_table(groups);
  // means 2,4,6; grand 4: ss_b = 24, ms_b = 12; ss_w = 6, ms_w = 1 -> F = 12
  CHECK(table.f == doctest::Approx(12.0).epsilon(1e-12));
  const AnovaResult res = one_way_anova(groups);
  CHECK(res.f_stat == doctest::Approx(table.f).epsilon(1e-12));
  CHECK(res.df_between == 2);
  CHECK(res.df_within == 6);
  // df1 = 2 closed form: p = (df2 / (df2 + 2F))^(df2/2) = 0.2^3
  CHECK(res.p_value == doctest::Approx(0.008).epsilon(1e-10));
}

TEST_CASE("anova: random instances match the oracle F and closed form p") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> groups(3);
    for (auto& g : groups) {
      g.resize(3 + rng.uniform_int(5));
      for (auto& v : g) v = rng.normal(rng.uniform(-1, 1), 1.0);
    }
    const auto table = oracles::anova_table(groups);
    const AnovaResult res = one_way_anova(groups);
    CHECK(res.f_stat == doctest::Approx(table.f).epsilon(1e-10));
    // df1 = 2 -> I_x(df2/2, 1) = x^(df2/2)
    const double x = table.df_within / (table.df_within + 2.0 * table.f);
    CHECK(res.p_value ==
          doctest::Approx(std::pow(x, table.df_within / 2.0)).epsilon(1e-9));
  }
}

TEST_CASE("anova invariances: shift and scale") {
  Rng rng(23);
  std::vector<std::vector<double>> groups{{1.0, 2.5, 2.0}, {4.0, 3.5, 5.0},
                                          {0.5, 1.5, 1.0, 2.0}};
  const double f0 = one_way_anova(groups).f_stat;
  auto transformed = groups;
  for (auto& g : transformed)
    for (auto& v : g) v = v + 13.25;
  CHECK(one_way_anova(transformed).f_stat == doctest::Approx(f0).epsilon(1e-9));
  transformed = groups;
  for (auto& g : transformed)
    for (auto& v : g) v = v * -2.5;
  CHECK(one_way_anova(transformed).f_stat == doctest::Approx(f0).epsilon(1e-9));
}

TEST_CASE("anova: p decreases as F grows for fixed dfs") {
  double prev = 1.1;
  for (double f : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
    const double p = f_distribution_sf(f, 2, 20);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("anova preconditions") {
  CHECK_THROWS_AS(one_way_anova(std::vector<std::vector<double>>{{1, 2}}),
                  ValidationError);
  CHECK_THROWS_AS(
      one_way_anova(std::vector<std::vector<double>>{{1, 2}, {1}}),
      ValidationError);
}

TEST_CASE("chi-square: perfectly proportional table gives 0, p 1") {
  Mat table(2, 2);
  table.v = {10, 10, 20, 20};
  const auto res = chi_square_independence(table);
  CHECK(res.statistic == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.p_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.df == 1);
}

TEST_CASE("chi-square on the 3x2 sex table reproduces p near 0.03") {
  Mat table(3, 2);
  table.v = {29, 23, 38, 12, 21, 19};
  // independent computation of the statistic from marginals
  const double rows[3] = {52, 50, 40};
  const double cols[2] = {88, 54};
  const double total = 142;
  double stat = 0.0;
  const double obs[3][2] = {{29, 23}, {38, 12}, {21, 19}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / total;
      stat += (obs[i][j] - expected) * (obs[i][j] - expected) / expected;
    }
  const auto res = chi_square_independence(table);
  CHECK(res.statistic == doctest::Approx(stat).epsilon(1e-12));
  CHECK(res.df == 2);
  // df = 2 closed form survival
  CHECK(res.p_value == doctest::Approx(std::exp(-stat / 2.0)).epsilon(1e-10));
  CHECK(res.p_value > 0.02);
  CHECK(res.p_value < 0.05);
}

TEST_CASE("chi-square survival at df=2 equals exp(-x/2) to 1e-10") {
  for (double x : {0.1, 1.0, 3.0, 6.55, 12.0, 30.0})
    CHECK(chi_square_sf(x, 2) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-10));
}

TEST_CASE("chi-square rejects zero marginals and tiny tables") {
  Mat table(2, 2);
  table.v = {0, 0, 5, 5};
  CHECK_THROWS_AS(chi_square_independence(table), ValidationError);
  Mat tiny(1, 2);
  tiny.v = {1, 2};
  CHECK_THROWS_AS(chi_square_independence(tiny), ValidationError);
}

namespace {

std::vector<ConnectivityMatrix> screen_fixture(std::vector<ClassLabel>& labels,
                                               uint64_t seed) {
  // one discriminative edge (0,1): per-class mean offsets
  Rng rng(seed);
  std::vector<ConnectivityMatrix> matrices;
  const double level[3] = {-0.5, 0.0, 0.5};
  for (int c = 0; c < 3; ++c) {
    for (int s = 0; s < 4; ++s) {
      ConnectivityMatrix cm;
      cm.subject_id = std::string("s") + std::to_string(c) + std::to_string(s);
      cm.values = Mat(4, 4);
      for (int i = 0; i < 4; ++i) cm.values(i, i) = 1.0;
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
          double v = 0.02 * rng.normal();
          if (i == 0 && j == 1) v += level[c];
          cm.values(i, j) = v;
          cm.values(j, i) = v;
        }
      matrices.push_back(std::move(cm));
      labels.push_back(static_cast<ClassLabel>(c));
    }
  }
  return matrices;
}

}  // namespace

TEST_CASE("edge_screen: identical matrices yield an empty list") {
  std::vector<ConnectivityMatrix> matrices;
  std::vector<ClassLabel> labels;
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < 3; ++s) {
      ConnectivityMatrix cm;
      cm.values = Mat(3, 3, 0.25);
      matrices.push_back(cm);
      labels.push_back(static_cast<ClassLabel>(c));
    }
  CHECK(edge_screen(matrices, labels, 0.0005).empty());
}

TEST_CASE("edge_screen: the constructed edge comes out first") {
  std::vector<ClassLabel> labels;
  const auto matrices = screen_fixture(labels, 31);
  const auto edges = edge_screen(matrices, labels, 0.0005);
  REQUIRE(!edges.empty());
  CHECK(edges.front().i == 0);
  CHECK(edges.front().j == 1);
}

TEST_CASE("edge_screen: alpha = 1 returns every edge") {
  std::vector<ClassLabel> labels;
  const auto matrices = screen_fixture(labels, 32);
  const auto edges = edge_screen(matrices, labels, 1.0);
  CHECK(edges.size() == 4 * 3 / 2);
}

TEST_CASE("edge_screen is independent of subject ordering") {
  std::vector<ClassLabel> labels;
  const auto matrices = screen_fixture(labels, 33);
  const auto edges = edge_screen(matrices, labels, 1.0);

  std::vector<ConnectivityMatrix> shuffled = matrices;
  std::vector<ClassLabel> shuffled_labels = labels;
  Rng rng(2);
  for (size_t i = shuffled.size(); i > 1; --i) {
    const int j = rng.uniform_int(static_cast<int>(i));
    std::swap(shuffled[i - 1], shuffled[j]);
    std::swap(shuffled_labels[i - 1], shuffled_labels[j]);
  }
  const auto edges2 = edge_screen(shuffled, shuffled_labels, 1.0);
  REQUIRE(edges.size() == edges2.size());
  for (size_t e = 0; e < edges.size(); ++e) {
    CHECK(edges[e].i == edges2[e].i);
    CHECK(edges[e].j == edges2[e].j);
    CHECK(edges[e].p_value == doctest::Approx(edges2[e].p_value).epsilon(1e-12));
  }
}

TEST_CASE("edge_screen requires two samples per class") {
  std::vector<ConnectivityMatrix> matrices;
  std::vector<ClassLabel> labels;
  for (int c = 0; c < 3; ++c) {
    ConnectivityMatrix cm;
    cm.values = Mat(2, 2, 0.1);
    matrices.push_back(cm);
    labels.push_back(static_cast<ClassLabel>(c));
  }
  CHECK_THROWS_AS(edge_screen(matrices, labels, 0.05), ValidationError);
}

}  // TEST_SUITE
