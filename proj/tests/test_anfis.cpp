#include <doctest.h>

#include <cmath>

#include "fcfuzz/anfis.hpp"
#include "fcfuzz/common.hpp"
#include "fcfuzz/it2fr.hpp"
#include "oracles.hpp"

using namespace fcfuzz;

namespace {

Mat blob_features(std::vector<ClassLabel>& labels, int per_class, uint64_t seed) {
  Rng rng(seed);
  Mat features(3 * per_class, 2);
  const double centers[3][2] = {{0, 0}, {8, 0}, {0, 8}};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int row = c * per_class + i;
      features(row, 0) = centers[c][0] + 0.3 * rng.normal();
      features(row, 1) = centers[c][1] + 0.3 * rng.normal();
      labels.push_back(static_cast<ClassLabel>(c));
    }
  return features;
}

AnfisModel random_model(int rules, int d, Rng& rng) {
  AnfisModel model;
  model.feature_dim = d;
  for (int r = 0; r < rules; ++r) {
    AnfisRule rule;
    for (int j = 0; j < d; ++j)
      rule.premises.push_back({rng.uniform(-2, 2), rng.uniform(0.3, 1.5)});
    for (int j = 0; j <= d; ++j) rule.coeffs.push_back(rng.normal());
    model.rules.push_back(rule);
  }
  return model;
}

double model_mse(const AnfisModel& model, const Mat& x,
                 const std::vector<double>& t) {
  double sum = 0.0;
  for (int i = 0; i < x.rows; ++i) {
    const double e = t[i] - anfis_predict(model, x.row(i));
    sum += e * e;
  }
  return sum / x.rows;
}

}  // namespace

TEST_SUITE("anfis") {

TEST_CASE("single rule passes its consequent through") {
  AnfisModel model;
  model.feature_dim = 2;
  AnfisRule rule;
  rule.premises = {{0.0, 1.0}, {0.0, 1.0}};
  rule.coeffs = {1.0, 2.0, -0.5};
  model.rules.push_back(rule);
  const std::vector<double> x{3.0, 4.0};
  CHECK(anfis_predict(model, x) == doctest::Approx(1.0 + 6.0 - 2.0).epsilon(1e-12));
}

TEST_CASE("two rules with equal firing average their consequents") {
  AnfisModel model;
  model.feature_dim = 1;
  AnfisRule r1, r2;
  r1.premises = {{-1.0, 1.0}};
  r1.coeffs = {1.0, 0.0};
  r2.premises = {{1.0, 1.0}};
  r2.coeffs = {3.0, 0.0};
  model.rules = {r1, r2};
  // x = 0 is equidistant from both premises
  CHECK(anfis_predict(model, std::vector<double>{0.0}) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("IT2FR with zero FOU and identical parameters agrees to 1e-12") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 3, m = 3;
    const AnfisModel anfis = random_model(m, d, rng);
    IT2FRModel it2;
    it2.feature_dim = d;
    it2.fou_delta = 0.0;
    for (const auto& rule : anfis.rules) {
      FuzzyRule fr;
      for (const auto& p : rule.premises)
        fr.antecedents.push_back({p.mean, p.sigma, p.sigma});
      fr.coeffs = rule.coeffs;
      it2.rules.push_back(fr);
    }
    std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    const double ya = anfis_predict(anfis, x);
    const auto yb = predict(it2, x);
    CHECK(ya == doctest::Approx(yb.y_star).epsilon(1e-12));
    CHECK(yb.y_left == doctest::Approx(yb.y_right).epsilon(1e-12));
  }
}

TEST_CASE("prediction is invariant under rule permutation") {
  Rng rng(2);
  AnfisModel model = random_model(4, 2, rng);
  AnfisModel shuffled = model;
  std::swap(shuffled.rules[0], shuffled.rules[3]);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x{rng.normal(), rng.normal()};
    CHECK(anfis_predict(model, x) ==
          doctest::Approx(anfis_predict(shuffled, x)).epsilon(1e-12));
  }
}

TEST_CASE("linear targets with one rule are recovered to tiny RMSE") {
  Rng rng(3);
  const int n = 40;
  Mat x(n, 2);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-3, 3);
    x(i, 1) = rng.uniform(-3, 3);
    t[i] = 0.5 + 2.0 * x(i, 0) - 1.5 * x(i, 1);
  }
  AnfisOptions options;
  options.rules = 1;
  options.ridge = 1e-10;
  options.hybrid_iters = 0;
  Rng fit_rng(3);
  const AnfisModel model = anfis_fit(x, t, options, fit_rng);
  CHECK(std::sqrt(model_mse(model, x, t)) < 1e-6);
  CHECK(model.rules[0].coeffs[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(model.rules[0].coeffs[1] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(model.rules[0].coeffs[2] == doctest::Approx(-1.5).epsilon(1e-6));
}

TEST_CASE("zero hybrid iterations equals FCM init plus one LSE pass") {
  Rng rng(4);
  const int n = 30;
  Mat x(n, 2);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    t[i] = std::sin(x(i, 0)) + 0.3 * x(i, 1);
  }
  AnfisOptions options;
  options.rules = 2;
  options.hybrid_iters = 0;
  Rng rng_a(5);
  const AnfisModel a = anfis_fit(x, t, options, rng_a);

  // manual: same FCM stream, premises from derive_mfs(delta 0), one LSE
  Rng rng_b(5);
  const FcmResult fcm = fcm_cluster(x, 2, 2.0, 1e-6, 300, rng_b);
  const auto mfs = derive_mfs(fcm, x, 0.0);
  AnfisModel b;
  b.feature_dim = 2;
  b.rules.resize(2);
  for (int r = 0; r < 2; ++r) {
    for (int j = 0; j < 2; ++j)
      b.rules[r].premises.push_back({mfs[r][j].mean, mfs[r][j].sigma1});
    b.rules[r].coeffs.assign(3, 0.0);
  }
  anfis_solve_consequents(b, x, t, options.ridge);
  for (int i = 0; i < n; ++i)
    CHECK(anfis_predict(a, x.row(i)) ==
          doctest::Approx(anfis_predict(b, x.row(i))).epsilon(1e-12));
}

TEST_CASE("consequent LSE is optimal: +-1e-3 nudges never help") {
  Rng rng(6);
  const int n = 25;
  Mat x(n, 2);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    t[i] = x(i, 0) * x(i, 0) - x(i, 1);
  }
  AnfisOptions options;
  options.rules = 2;
  options.ridge = 1e-9;
  options.hybrid_iters = 0;
  Rng fit_rng(6);
  AnfisModel model = anfis_fit(x, t, options, fit_rng);
  const double base = model_mse(model, x, t);
  for (size_t r = 0; r < model.rules.size(); ++r) {
    for (size_t j = 0; j < model.rules[r].coeffs.size(); ++j) {
      for (double nudge : {1e-3, -1e-3}) {
        AnfisModel probe = model;
        probe.rules[r].coeffs[j] += nudge;
        CHECK(model_mse(probe, x, t) >= base - 1e-12);
      }
    }
  }
}

TEST_CASE("premise gradients match central finite differences") {
  Rng rng(7);
  const int n = 15;
  Mat x(n, 2);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    t[i] = rng.normal();
  }
  AnfisModel model = random_model(2, 2, rng);
  const AnfisPremiseGrads grads = anfis_premise_gradients(model, x, t);
  const std::vector<double> tv(t);
  const double eps = 1e-5;
  for (int r = 0; r < 2; ++r) {
    for (int j = 0; j < 2; ++j) {
      {
        AnfisModel up = model, down = model;
        up.rules[r].premises[j].mean += eps;
        down.rules[r].premises[j].mean -= eps;
        const double fd = (model_mse(up, x, tv) - model_mse(down, x, tv)) / (2 * eps);
        CHECK(grads.d_mean[r][j] == doctest::Approx(fd).epsilon(1e-5));
      }
      {
        AnfisModel up = model, down = model;
        up.rules[r].premises[j].sigma += eps;
        down.rules[r].premises[j].sigma -= eps;
        const double fd = (model_mse(up, x, tv) - model_mse(down, x, tv)) / (2 * eps);
        CHECK(grads.d_sigma[r][j] == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("hybrid RMSE history is non-increasing") {
  Rng rng(8);
  const int n = 40;
  Mat x(n, 2);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-2, 2);
    x(i, 1) = rng.uniform(-2, 2);
    t[i] = std::tanh(x(i, 0)) - 0.5 * x(i, 1) * x(i, 1);
  }
  AnfisOptions options;
  options.rules = 3;
  options.hybrid_iters = 15;
  options.premise_learning_rate = 1e-2;
  Rng fit_rng(8);
  std::vector<double> history;
  anfis_fit(x, t, options, fit_rng, &history);
  REQUIRE(history.size() == 16);
  for (size_t i = 1; i < history.size(); ++i)
    CHECK(history[i] <= history[i - 1] + 1e-9);
}

TEST_CASE("one-vs-rest classifier nails separable blobs") {
  std::vector<ClassLabel> labels;
  const Mat features = blob_features(labels, 10, 9);
  AnfisOptions options;
  options.rules = 3;
  options.hybrid_iters = 5;
  Rng rng(9);
  const AnfisClassifier clf = anfis_fit_classifier(features, labels, options, rng);
  int correct = 0;
  for (int i = 0; i < features.rows; ++i)
    if (anfis_classify(clf, features.row(i)).label == labels[i]) ++correct;
  CHECK(correct == features.rows);
}

TEST_CASE("metaheuristic training mode runs and does not regress") {
  std::vector<ClassLabel> labels;
  const Mat features = blob_features(labels, 5, 10);
  std::vector<double> targets(features.rows);
  for (int i = 0; i < features.rows; ++i)
    targets[i] = (labels[i] == ClassLabel::HC) ? 1.0 : 0.0;

  AnfisOptions plain;
  plain.rules = 2;
  plain.hybrid_iters = 0;
  Rng rng_plain(10);
  const AnfisModel init = anfis_fit(features, targets, plain, rng_plain);

  AnfisOptions tuned = plain;
  tuned.mode = AnfisTrainMode::Metaheuristic;
  MetaheuristicSpec spec;
  spec.kind = MetaKind::PSO;
  spec.population = 12;
  spec.max_iter = 20;
  tuned.optimizer = spec;
  Rng rng_tuned(10);
  const AnfisModel refined = anfis_fit(features, targets, tuned, rng_tuned);
  CHECK(model_mse(refined, features, targets) <=
        model_mse(init, features, targets) + 1e-12);
}

TEST_CASE("model file round trip") {
  std::vector<ClassLabel> labels;
  const Mat features = blob_features(labels, 4, 11);
  AnfisOptions options;
  options.rules = 2;
  options.hybrid_iters = 2;
  Rng rng(11);
  const AnfisClassifier clf = anfis_fit_classifier(features, labels, options, rng);
  oracles::TempDir tmp;
  save_anfis(clf, tmp.path / "m.anfis");
  const AnfisClassifier loaded = load_anfis(tmp.path / "m.anfis");
  for (int i = 0; i < features.rows; ++i)
    CHECK(anfis_classify(clf, features.row(i)).label ==
          anfis_classify(loaded, features.row(i)).label);
}

}  // TEST_SUITE
