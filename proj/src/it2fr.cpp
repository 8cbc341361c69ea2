#include "fcfuzz/it2fr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fcfuzz/one_vs_rest.hpp"

namespace fcfuzz {

namespace {

void check_dim(const IT2FRModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.feature_dim)
    throw ValidationError("it2fr: input has " + std::to_string(x.size()) +
                          " dimensions, model expects " +
                          std::to_string(model.feature_dim));
}

double rule_output(const IT2FRModel& model, const FuzzyRule& rule,
                   std::span<const double> x) {
  double y;
  size_t j0;
  if (model.use_bias) {
    y = rule.coeffs[0];
    j0 = 1;
  } else {
    y = 0.0;
    j0 = 0;
  }
  for (size_t j = 0; j < x.size(); ++j) y += rule.coeffs[j0 + j] * x[j];
  return y;
}

// Normalized weights from log firings; max-shifted, so a finite maximum never
// underflows to an all-zero vector.
std::vector<double> normalize_log(std::span<const double> logs) {
  const double m = *std::max_element(logs.begin(), logs.end());
  std::vector<double> h(logs.size());
  if (!std::isfinite(m)) {
    std::fill(h.begin(), h.end(), 1.0 / static_cast<double>(logs.size()));
    return h;
  }
  double sum = 0.0;
  for (size_t r = 0; r < logs.size(); ++r) {
    h[r] = std::exp(logs[r] - m);
    sum += h[r];
  }
  for (double& v : h) v /= sum;
  return h;
}

}  // namespace

FiringInterval firing_interval(const FuzzyRule& rule, std::span<const double> x) {
  if (rule.antecedents.size() != x.size())
    throw ValidationError("firing_interval: dimension mismatch");
  double log_lower = 0.0, log_upper = 0.0;
  for (size_t j = 0; j < x.size(); ++j) {
    const auto [ll, lu] = mf_log_eval(rule.antecedents[j], x[j]);
    log_lower += ll;
    log_upper += lu;
  }
  return {std::exp(log_lower), std::exp(log_upper)};
}

NormalizedStrengths normalized_strengths(std::span<const FiringInterval> firings) {
  if (firings.empty())
    throw ValidationError("normalized_strengths: no firings");
  NormalizedStrengths ns;
  const size_t m = firings.size();
  ns.lower.resize(m);
  ns.upper.resize(m);
  double sum_lower = 0.0, sum_upper = 0.0;
  for (const auto& f : firings) {
    sum_lower += f.lower;
    sum_upper += f.upper;
  }
  if (sum_lower <= 0.0 || sum_upper <= 0.0) {
    ns.underflow = true;
    std::fill(ns.lower.begin(), ns.lower.end(), 1.0 / static_cast<double>(m));
    std::fill(ns.upper.begin(), ns.upper.end(), 1.0 / static_cast<double>(m));
    return ns;
  }
  for (size_t r = 0; r < m; ++r) {
    ns.lower[r] = firings[r].lower / sum_lower;
    ns.upper[r] = firings[r].upper / sum_upper;
  }
  return ns;
}

TypeReducedOutput predict(const IT2FRModel& model, std::span<const double> x) {
  check_dim(model, x);
  const size_t m = model.rules.size();
  std::vector<double> log_lower(m), log_upper(m), outputs(m);
  for (size_t r = 0; r < m; ++r) {
    const auto& rule = model.rules[r];
    double ll = 0.0, lu = 0.0;
    for (size_t j = 0; j < x.size(); ++j) {
      const auto [l1, l2] = mf_log_eval(rule.antecedents[j], x[j]);
      ll += l1;
      lu += l2;
    }
    log_lower[r] = ll;
    log_upper[r] = lu;
    outputs[r] = rule_output(model, rule, x);
  }
  const auto h_lower = normalize_log(log_lower);
  const auto h_upper = normalize_log(log_upper);
  double y_lo = 0.0, y_up = 0.0;
  for (size_t r = 0; r < m; ++r) {
    y_lo += h_lower[r] * outputs[r];
    y_up += h_upper[r] * outputs[r];
  }
  TypeReducedOutput out;
  out.y_left = std::min(y_lo, y_up);
  out.y_right = std::max(y_lo, y_up);
  out.y_star = (out.y_left + out.y_right) / 2.0;
  return out;
}

IT2FRModel fit_init(const Mat& features, std::span<const double> targets, int rules,
                    double fou_delta, double ridge, Rng& rng, bool use_bias) {
  const int n = features.rows;
  const int d = features.cols;
  if (n == 0) throw ValidationError("fit_init: empty feature matrix");
  if (static_cast<int>(targets.size()) != n)
    throw ValidationError("fit_init: features/targets size mismatch");
  if (n < rules)
    throw ValidationError("fit_init: fewer samples than rules");

  const FcmResult fcm = fcm_cluster(features, rules, 2.0, 1e-6, 300, rng);
  const auto mfs = derive_mfs(fcm, features, fou_delta);

  IT2FRModel model;
  model.feature_dim = d;
  model.fou_delta = fou_delta;
  model.use_bias = use_bias;
  model.rules.resize(rules);

  const int p = d + (use_bias ? 1 : 0);
  std::vector<double> phi(p);
  for (int r = 0; r < rules; ++r) {
    model.rules[r].antecedents = mfs[r];
    Mat normal(p, p, 0.0);
    std::vector<double> rhs(p, 0.0);
    for (int i = 0; i < n; ++i) {
      const double weight = fcm.memberships(i, r);
      int k = 0;
      if (use_bias) phi[k++] = 1.0;
      for (int j = 0; j < d; ++j) phi[k++] = features(i, j);
      for (int a = 0; a < p; ++a) {
        const double wa = weight * phi[a];
        rhs[a] += wa * targets[i];
        for (int b = a; b < p; ++b) normal(a, b) += wa * phi[b];
      }
    }
    for (int a = 0; a < p; ++a) {
      normal(a, a) += ridge;
      for (int b = 0; b < a; ++b) normal(a, b) = normal(b, a);
    }
    try {
      model.rules[r].coeffs = cholesky_solve(std::move(normal), std::move(rhs));
    } catch (const Error&) {
      throw Error("fit_init: singular normal equations for rule " +
                  std::to_string(r));
    }
  }
  return model;
}

namespace detail {

std::vector<double> encode_theta(const IT2FRModel& model) {
  std::vector<double> theta;
  const size_t m = model.rules.size();
  const size_t d = model.feature_dim;
  theta.reserve(3 * m * d + m * model.rules[0].coeffs.size());
  for (const auto& rule : model.rules)
    for (const auto& mf : rule.antecedents) theta.push_back(mf.mean);
  for (const auto& rule : model.rules)
    for (const auto& mf : rule.antecedents) theta.push_back(mf.sigma1);
  for (const auto& rule : model.rules)
    for (const auto& mf : rule.antecedents) theta.push_back(mf.sigma2);
  for (const auto& rule : model.rules)
    for (double a : rule.coeffs) theta.push_back(a);
  return theta;
}

IT2FRModel decode_theta(std::span<const double> theta, const IT2FRModel& shape) {
  IT2FRModel model = shape;
  size_t k = 0;
  for (auto& rule : model.rules)
    for (auto& mf : rule.antecedents) mf.mean = theta[k++];
  for (auto& rule : model.rules)
    for (auto& mf : rule.antecedents) mf.sigma1 = theta[k++];
  for (auto& rule : model.rules)
    for (auto& mf : rule.antecedents) mf.sigma2 = theta[k++];
  for (auto& rule : model.rules)
    for (double& a : rule.coeffs) a = theta[k++];
  if (k != theta.size()) throw Error("decode_theta: length mismatch");
  // keep the lower/upper ordering regardless of where the search moved them
  for (auto& rule : model.rules)
    for (auto& mf : rule.antecedents)
      if (mf.sigma1 > mf.sigma2) std::swap(mf.sigma1, mf.sigma2);
  return model;
}

Bounds theta_bounds(const IT2FRModel& model, const Mat& features) {
  const int n = features.rows;
  const int d = features.cols;
  std::vector<double> lo_j(d), hi_j(d), range(d);
  for (int j = 0; j < d; ++j) {
    double lo = features(0, j), hi = features(0, j);
    for (int i = 1; i < n; ++i) {
      lo = std::min(lo, features(i, j));
      hi = std::max(hi, features(i, j));
    }
    lo_j[j] = lo;
    hi_j[j] = hi;
    range[j] = (hi - lo) > 0.0 ? (hi - lo) : 1.0;
  }
  Bounds b;
  const size_t m = model.rules.size();
  // means: feature range per dimension
  for (size_t r = 0; r < m; ++r)
    for (int j = 0; j < d; ++j) {
      double lo = lo_j[j], hi = hi_j[j];
      if (!(lo < hi)) {
        lo -= 0.5;
        hi += 0.5;
      }
      b.lo.push_back(lo);
      b.hi.push_back(hi);
    }
  // sigma1 and sigma2 blocks: positive, up to twice the dimension range
  for (int block = 0; block < 2; ++block)
    for (size_t r = 0; r < m; ++r)
      for (int j = 0; j < d; ++j) {
        b.lo.push_back(1e-6 * range[j]);
        b.hi.push_back(2.0 * range[j]);
      }
  // coefficients: +-10 * (|init| + 1)
  for (const auto& rule : model.rules)
    for (double a : rule.coeffs) {
      const double mag = 10.0 * (std::fabs(a) + 1.0);
      b.lo.push_back(-mag);
      b.hi.push_back(mag);
    }
  return b;
}

}  // namespace detail

IT2FRClassifier fit_classifier(const Mat& features,
                               std::span<const ClassLabel> labels,
                               const It2frOptions& options, Rng& rng,
                               std::array<OptResult, kNumClasses>* opt_results) {
  const int n = features.rows;
  if (static_cast<int>(labels.size()) != n)
    throw ValidationError("fit_classifier: features/labels size mismatch");
  require_all_classes(labels, "fit_classifier");

  int current_class = 0;
  auto fit_one = [&](const std::vector<double>& targets, Rng& fit_rng) {
    IT2FRModel model = fit_init(features, targets, options.rules,
                                options.fou_delta, options.ridge, fit_rng,
                                options.use_bias);
    if (options.optimizer) {
      ObjectiveSpec objective;
      const IT2FRModel shape = model;
      objective.evaluate = [&](std::span<const double> theta) {
        const IT2FRModel candidate = detail::decode_theta(theta, shape);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
          const double e = targets[i] - predict(candidate, features.row(i)).y_star;
          sum += e * e;
        }
        return sum / n;
      };
      objective.init_point = detail::encode_theta(model);
      objective.dimension = static_cast<int>(objective.init_point->size());
      objective.bounds = detail::theta_bounds(model, features);
      MetaheuristicSpec spec = *options.optimizer;
      spec.seed = fit_rng.child(0x6f7074).seed();
      OptResult result = minimize(objective, spec);
      if (std::isfinite(result.best_score)) {
        model = detail::decode_theta(result.best, shape);
      }
      // the seeded init member guarantees the refined model is never worse
      // than the initialization
      if (opt_results) (*opt_results)[current_class] = std::move(result);
    }
    ++current_class;
    return model;
  };
  IT2FRClassifier classifier;
  classifier.models = fit_one_vs_rest<IT2FRModel>(labels, rng, fit_one);
  return classifier;
}

ClassScores classify(const IT2FRClassifier& classifier, std::span<const double> x) {
  ClassScores scores;
  for (int c = 0; c < kNumClasses; ++c)
    scores.y_star[c] = predict(classifier.models[c], x).y_star;
  scores.label = static_cast<ClassLabel>(argmax_class(scores.y_star));
  return scores;
}

namespace {

void write_values(std::ofstream& out, const char* name,
                  std::span<const double> values) {
  out << name;
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

std::vector<double> read_values(std::istringstream& ss, const std::string& name,
                                size_t expect) {
  std::vector<double> values;
  values.reserve(expect);
  std::string tok;
  while (ss >> tok) values.push_back(parse_double(tok, "it2fr model: " + name));
  if (values.size() != expect)
    throw ValidationError("it2fr model: '" + name + "' expected " +
                          std::to_string(expect) + " values, got " +
                          std::to_string(values.size()));
  return values;
}

}  // namespace

void save_it2fr(const IT2FRClassifier& classifier, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model '" + path.string() + "'");
  const auto& first = classifier.models[0];
  out << "fcfuzz-it2fr 1\n";
  out << "classes " << kNumClasses << '\n';
  out << "rules " << first.rules.size() << '\n';
  out << "dim " << first.feature_dim << '\n';
  out << "fou_delta " << format_double(first.fou_delta) << '\n';
  out << "bias " << (first.use_bias ? 1 : 0) << '\n';
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& model = classifier.models[c];
    out << "model " << c << '\n';
    for (size_t r = 0; r < model.rules.size(); ++r) {
      const auto& rule = model.rules[r];
      out << "rule " << r << '\n';
      std::vector<double> means, s1, s2;
      for (const auto& mf : rule.antecedents) {
        means.push_back(mf.mean);
        s1.push_back(mf.sigma1);
        s2.push_back(mf.sigma2);
      }
      write_values(out, "means", means);
      write_values(out, "sigma1", s1);
      write_values(out, "sigma2", s2);
      write_values(out, "coeffs", rule.coeffs);
    }
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

IT2FRClassifier load_it2fr(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model '" + path.string() + "'");
  std::string line;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line))
      throw ValidationError("it2fr model '" + path.string() + "': truncated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto expect_kv = [&](const std::string& key) -> std::string {
    std::istringstream ss(next_line());
    std::string k, v;
    ss >> k >> v;
    if (k != key)
      throw ValidationError("it2fr model '" + path.string() + "': expected '" +
                            key + "', got '" + k + "'");
    return v;
  };
  if (next_line() != "fcfuzz-it2fr 1")
    throw ValidationError("it2fr model '" + path.string() + "': bad header");
  const int classes = static_cast<int>(parse_int(expect_kv("classes"), "classes"));
  if (classes != kNumClasses)
    throw ValidationError("it2fr model: unsupported class count");
  const int rules = static_cast<int>(parse_int(expect_kv("rules"), "rules"));
  const int dim = static_cast<int>(parse_int(expect_kv("dim"), "dim"));
  const double fou_delta = parse_double(expect_kv("fou_delta"), "fou_delta");
  const bool use_bias = parse_int(expect_kv("bias"), "bias") != 0;

  IT2FRClassifier classifier;
  const size_t coeff_count = dim + (use_bias ? 1 : 0);
  for (int c = 0; c < kNumClasses; ++c) {
    expect_kv("model");
    IT2FRModel& model = classifier.models[c];
    model.feature_dim = dim;
    model.fou_delta = fou_delta;
    model.use_bias = use_bias;
    model.rules.resize(rules);
    for (int r = 0; r < rules; ++r) {
      expect_kv("rule");
      auto read_block = [&](const char* name, size_t count) {
        std::istringstream ss(next_line());
        std::string key;
        ss >> key;
        if (key != name)
          throw ValidationError(std::string("it2fr model: expected '") + name +
                                "', got '" + key + "'");
        return read_values(ss, name, count);
      };
      const auto means = read_block("means", dim);
      const auto s1 = read_block("sigma1", dim);
      const auto s2 = read_block("sigma2", dim);
      model.rules[r].coeffs = read_block("coeffs", coeff_count);
      model.rules[r].antecedents.resize(dim);
      for (int j = 0; j < dim; ++j) {
        if (!(s1[j] > 0.0) || !(s2[j] > 0.0) || s1[j] > s2[j])
          throw ValidationError("it2fr model: invalid sigmas at rule " +
                                std::to_string(r) + ", dim " + std::to_string(j));
        model.rules[r].antecedents[j] = {means[j], s1[j], s2[j]};
      }
    }
  }
  return classifier;
}

}  // namespace fcfuzz
