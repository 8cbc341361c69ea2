#include "fcfuzz/anfis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fcfuzz/metaheuristics.hpp"
#include "fcfuzz/one_vs_rest.hpp"

namespace fcfuzz {

namespace {

// Normalized firings for one sample, computed from max-shifted log firings.
std::vector<double> normalized_firings(const AnfisModel& model,
                                       std::span<const double> x) {
  const size_t m = model.rules.size();
  std::vector<double> logs(m);
  for (size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (size_t j = 0; j < x.size(); ++j)
      s += mf_log_eval(model.rules[r].premises[j], x[j]);
    logs[r] = s;
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  std::vector<double> h(m);
  if (!std::isfinite(mx)) {
    std::fill(h.begin(), h.end(), 1.0 / static_cast<double>(m));
    return h;
  }
  double sum = 0.0;
  for (size_t r = 0; r < m; ++r) {
    h[r] = std::exp(logs[r] - mx);
    sum += h[r];
  }
  for (double& v : h) v /= sum;
  return h;
}

double consequent(const AnfisRule& rule, std::span<const double> x) {
  double y = rule.coeffs[0];
  for (size_t j = 0; j < x.size(); ++j) y += rule.coeffs[j + 1] * x[j];
  return y;
}

double training_rmse(const AnfisModel& model, const Mat& features,
                     std::span<const double> targets) {
  std::vector<double> outputs(features.rows);
  for (int i = 0; i < features.rows; ++i)
    outputs[i] = anfis_predict(model, features.row(i));
  return rmse(targets, outputs);
}

std::vector<double> sigma_floors(const Mat& data) {
  std::vector<double> floors(data.cols);
  for (int j = 0; j < data.cols; ++j) {
    double lo = data(0, j), hi = data(0, j);
    for (int i = 1; i < data.rows; ++i) {
      lo = std::min(lo, data(i, j));
      hi = std::max(hi, data(i, j));
    }
    const double range = hi - lo;
    floors[j] = 1e-6 * (range > 0.0 ? range : 1.0);
  }
  return floors;
}

}  // namespace

double anfis_predict(const AnfisModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.feature_dim)
    throw ValidationError("anfis_predict: dimension mismatch");
  const auto h = normalized_firings(model, x);
  double y = 0.0;
  for (size_t r = 0; r < model.rules.size(); ++r)
    y += h[r] * consequent(model.rules[r], x);
  return y;
}

void anfis_solve_consequents(AnfisModel& model, const Mat& features,
                             std::span<const double> targets, double ridge) {
  const int n = features.rows;
  const int d = model.feature_dim;
  const int m = static_cast<int>(model.rules.size());
  const int p = m * (d + 1);

  Mat normal(p, p, 0.0);
  std::vector<double> rhs(p, 0.0);
  std::vector<double> row(p);
  for (int i = 0; i < n; ++i) {
    const auto x = features.row(i);
    const auto h = normalized_firings(model, x);
    for (int r = 0; r < m; ++r) {
      row[r * (d + 1)] = h[r];
      for (int j = 0; j < d; ++j) row[r * (d + 1) + 1 + j] = h[r] * x[j];
    }
    for (int a = 0; a < p; ++a) {
      rhs[a] += row[a] * targets[i];
      for (int b = a; b < p; ++b) normal(a, b) += row[a] * row[b];
    }
  }
  for (int a = 0; a < p; ++a) {
    normal(a, a) += ridge;
    for (int b = 0; b < a; ++b) normal(a, b) = normal(b, a);
  }
  std::vector<double> solution;
  try {
    solution = cholesky_solve(std::move(normal), std::move(rhs));
  } catch (const Error&) {
    throw Error("anfis: singular consequent least-squares system");
  }
  for (int r = 0; r < m; ++r) {
    model.rules[r].coeffs.assign(solution.begin() + r * (d + 1),
                                 solution.begin() + (r + 1) * (d + 1));
  }
}

AnfisPremiseGrads anfis_premise_gradients(const AnfisModel& model,
                                          const Mat& features,
                                          std::span<const double> targets) {
  const int n = features.rows;
  const int d = model.feature_dim;
  const int m = static_cast<int>(model.rules.size());
  AnfisPremiseGrads grads;
  grads.d_mean.assign(m, std::vector<double>(d, 0.0));
  grads.d_sigma.assign(m, std::vector<double>(d, 0.0));

  for (int i = 0; i < n; ++i) {
    const auto x = features.row(i);
    const auto h = normalized_firings(model, x);
    std::vector<double> g(m);
    double y = 0.0;
    for (int r = 0; r < m; ++r) {
      g[r] = consequent(model.rules[r], x);
      y += h[r] * g[r];
    }
    // d(MSE)/dy for this sample; dy/dS_r = h_r (g_r - y)
    const double dl_dy = -2.0 * (targets[i] - y) / n;
    for (int r = 0; r < m; ++r) {
      const double dl_ds = dl_dy * h[r] * (g[r] - y);
      for (int j = 0; j < d; ++j) {
        const auto& mf = model.rules[r].premises[j];
        const double diff = x[j] - mf.mean;
        grads.d_mean[r][j] += dl_ds * diff / (mf.sigma * mf.sigma);
        grads.d_sigma[r][j] += dl_ds * diff * diff / (mf.sigma * mf.sigma * mf.sigma);
      }
    }
  }
  return grads;
}

AnfisModel anfis_fit(const Mat& features, std::span<const double> targets,
                     const AnfisOptions& options, Rng& rng) {
  return anfis_fit(features, targets, options, rng, nullptr);
}

AnfisModel anfis_fit(const Mat& features, std::span<const double> targets,
                     const AnfisOptions& options, Rng& rng,
                     std::vector<double>* rmse_history) {
  const int n = features.rows;
  if (static_cast<int>(targets.size()) != n)
    throw ValidationError("anfis_fit: features/targets size mismatch");
  if (n < options.rules)
    throw ValidationError("anfis_fit: fewer samples than rules");

  const FcmResult fcm = fcm_cluster(features, options.rules, 2.0, 1e-6, 300, rng);
  const auto mfs = derive_mfs(fcm, features, 0.0);

  AnfisModel model;
  model.feature_dim = features.cols;
  model.rules.resize(options.rules);
  for (int r = 0; r < options.rules; ++r) {
    model.rules[r].premises.resize(features.cols);
    for (int j = 0; j < features.cols; ++j)
      model.rules[r].premises[j] = {mfs[r][j].mean, mfs[r][j].sigma1};
    model.rules[r].coeffs.assign(features.cols + 1, 0.0);
  }
  anfis_solve_consequents(model, features, targets, options.ridge);

  if (options.mode == AnfisTrainMode::Metaheuristic) {
    if (!options.optimizer)
      throw ValidationError("anfis_fit: metaheuristic mode needs an optimizer spec");
    const int d = features.cols;
    const int m = options.rules;
    // theta = [means, sigmas, coeffs]
    auto encode = [&](const AnfisModel& mod) {
      std::vector<double> theta;
      for (const auto& rule : mod.rules)
        for (const auto& mf : rule.premises) theta.push_back(mf.mean);
      for (const auto& rule : mod.rules)
        for (const auto& mf : rule.premises) theta.push_back(mf.sigma);
      for (const auto& rule : mod.rules)
        for (double a : rule.coeffs) theta.push_back(a);
      return theta;
    };
    auto decode = [&](std::span<const double> theta) {
      AnfisModel mod = model;
      size_t k = 0;
      for (auto& rule : mod.rules)
        for (auto& mf : rule.premises) mf.mean = theta[k++];
      for (auto& rule : mod.rules)
        for (auto& mf : rule.premises) mf.sigma = theta[k++];
      for (auto& rule : mod.rules)
        for (double& a : rule.coeffs) a = theta[k++];
      return mod;
    };
    ObjectiveSpec objective;
    objective.evaluate = [&](std::span<const double> theta) {
      const AnfisModel candidate = decode(theta);
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = targets[i] - anfis_predict(candidate, features.row(i));
        sum += e * e;
      }
      return sum / n;
    };
    objective.init_point = encode(model);
    objective.dimension = static_cast<int>(objective.init_point->size());
    std::vector<double> lo_j(d), hi_j(d), range(d);
    for (int j = 0; j < d; ++j) {
      double lo = features(0, j), hi = features(0, j);
      for (int i = 1; i < n; ++i) {
        lo = std::min(lo, features(i, j));
        hi = std::max(hi, features(i, j));
      }
      if (!(lo < hi)) {
        lo -= 0.5;
        hi += 0.5;
      }
      lo_j[j] = lo;
      hi_j[j] = hi;
      range[j] = std::max(hi - lo, 1e-9);
    }
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < d; ++j) {
        objective.bounds.lo.push_back(lo_j[j]);
        objective.bounds.hi.push_back(hi_j[j]);
      }
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < d; ++j) {
        objective.bounds.lo.push_back(1e-6 * range[j]);
        objective.bounds.hi.push_back(2.0 * range[j]);
      }
    for (const auto& rule : model.rules)
      for (double a : rule.coeffs) {
        const double mag = 10.0 * (std::fabs(a) + 1.0);
        objective.bounds.lo.push_back(-mag);
        objective.bounds.hi.push_back(mag);
      }
    MetaheuristicSpec spec = *options.optimizer;
    spec.seed = rng.child(0x616e66).seed();
    const OptResult result = minimize(objective, spec);
    model = decode(result.best);
    if (rmse_history) rmse_history->push_back(training_rmse(model, features, targets));
    return model;
  }

  // hybrid: premise gradient step + consequent re-solve, with revert-on-worse
  const auto floors = sigma_floors(features);
  double best_rmse = training_rmse(model, features, targets);
  if (rmse_history) rmse_history->push_back(best_rmse);
  double lr = options.premise_learning_rate;
  for (int iter = 0; iter < options.hybrid_iters; ++iter) {
    const AnfisPremiseGrads grads = anfis_premise_gradients(model, features, targets);
    AnfisModel candidate = model;
    for (size_t r = 0; r < candidate.rules.size(); ++r)
      for (int j = 0; j < features.cols; ++j) {
        auto& mf = candidate.rules[r].premises[j];
        mf.mean -= lr * grads.d_mean[r][j];
        mf.sigma = std::max(mf.sigma - lr * grads.d_sigma[r][j], floors[j]);
      }
    anfis_solve_consequents(candidate, features, targets, options.ridge);
    const double cand_rmse = training_rmse(candidate, features, targets);
    if (cand_rmse <= best_rmse) {
      model = std::move(candidate);
      best_rmse = cand_rmse;
    } else {
      lr *= 0.5;
    }
    if (rmse_history) rmse_history->push_back(best_rmse);
  }
  return model;
}

AnfisClassifier anfis_fit_classifier(const Mat& features,
                                     std::span<const ClassLabel> labels,
                                     const AnfisOptions& options, Rng& rng) {
  if (static_cast<int>(labels.size()) != features.rows)
    throw ValidationError("anfis_fit_classifier: size mismatch");
  require_all_classes(labels, "anfis_fit_classifier");
  AnfisClassifier classifier;
  classifier.models = fit_one_vs_rest<AnfisModel>(
      labels, rng, [&](const std::vector<double>& targets, Rng& fit_rng) {
        return anfis_fit(features, targets, options, fit_rng);
      });
  return classifier;
}

AnfisScores anfis_classify(const AnfisClassifier& classifier,
                           std::span<const double> x) {
  AnfisScores s;
  for (int c = 0; c < kNumClasses; ++c)
    s.scores[c] = anfis_predict(classifier.models[c], x);
  s.label = static_cast<ClassLabel>(argmax_class(s.scores));
  return s;
}

void save_anfis(const AnfisClassifier& classifier, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model '" + path.string() + "'");
  const auto& first = classifier.models[0];
  out << "fcfuzz-anfis 1\n";
  out << "classes " << kNumClasses << '\n';
  out << "rules " << first.rules.size() << '\n';
  out << "dim " << first.feature_dim << '\n';
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& model = classifier.models[c];
    out << "model " << c << '\n';
    for (size_t r = 0; r < model.rules.size(); ++r) {
      out << "rule " << r << '\n';
      out << "means";
      for (const auto& mf : model.rules[r].premises)
        out << ' ' << format_double(mf.mean);
      out << "\nsigma";
      for (const auto& mf : model.rules[r].premises)
        out << ' ' << format_double(mf.sigma);
      out << "\ncoeffs";
      for (double a : model.rules[r].coeffs) out << ' ' << format_double(a);
      out << '\n';
    }
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

AnfisClassifier load_anfis(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model '" + path.string() + "'");
  std::string line;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line))
      throw ValidationError("anfis model '" + path.string() + "': truncated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto expect_kv = [&](const std::string& key) -> std::string {
    std::istringstream ss(next_line());
    std::string k, v;
    ss >> k >> v;
    if (k != key)
      throw ValidationError("anfis model '" + path.string() + "': expected '" +
                            key + "', got '" + k + "'");
    return v;
  };
  if (next_line() != "fcfuzz-anfis 1")
    throw ValidationError("anfis model '" + path.string() + "': bad header");
  if (parse_int(expect_kv("classes"), "classes") != kNumClasses)
    throw ValidationError("anfis model: unsupported class count");
  const int rules = static_cast<int>(parse_int(expect_kv("rules"), "rules"));
  const int dim = static_cast<int>(parse_int(expect_kv("dim"), "dim"));

  AnfisClassifier classifier;
  for (int c = 0; c < kNumClasses; ++c) {
    expect_kv("model");
    AnfisModel& model = classifier.models[c];
    model.feature_dim = dim;
    model.rules.resize(rules);
    for (int r = 0; r < rules; ++r) {
      expect_kv("rule");
      auto read_block = [&](const char* name, size_t count) {
        std::istringstream ss(next_line());
        std::string key;
        ss >> key;
        if (key != name)
          throw ValidationError(std::string("anfis model: expected '") + name + "'");
        std::vector<double> values;
        std::string tok;
        while (ss >> tok)
          values.push_back(parse_double(tok, std::string("anfis model: ") + name));
        if (values.size() != count)
          throw ValidationError(std::string("anfis model: '") + name +
                                "' wrong value count");
        return values;
      };
      const auto means = read_block("means", dim);
      const auto sigmas = read_block("sigma", dim);
      model.rules[r].coeffs = read_block("coeffs", dim + 1);
      model.rules[r].premises.resize(dim);
      for (int j = 0; j < dim; ++j) {
        if (!(sigmas[j] > 0.0))
          throw ValidationError("anfis model: non-positive sigma");
        model.rules[r].premises[j] = {means[j], sigmas[j]};
      }
    }
  }
  return classifier;
}

}  // namespace fcfuzz
