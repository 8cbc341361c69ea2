#include "fcfuzz/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fcfuzz/anfis.hpp"
#include "fcfuzz/baselines.hpp"
#include "fcfuzz/cnn_ae.hpp"
#include "fcfuzz/it2fr.hpp"

namespace fcfuzz {

FoldPlan make_folds(std::span<const ClassLabel> labels, int k, uint64_t seed) {
  const int n = static_cast<int>(labels.size());
  if (k < 2) throw ValidationError("make_folds: k must be >= 2");
  if (n < k)
    throw ValidationError("make_folds: " + std::to_string(n) +
                          " subjects cannot fill " + std::to_string(k) + " folds");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.assign(k, {});

  Rng rng(seed);
  std::array<std::vector<int>, kNumClasses> members;
  for (int i = 0; i < n; ++i) members[static_cast<int>(labels[i])].push_back(i);

  int offset = 0;  // rotates the remainder across classes to balance fold sizes
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = members[c];
    if (!idx.empty() && static_cast<int>(idx.size()) < k)
      plan.warnings.push_back(std::string("class ") +
                              to_string(static_cast<ClassLabel>(c)) + " has only " +
                              std::to_string(idx.size()) + " samples for k = " +
                              std::to_string(k));
    Rng class_rng = rng.child(static_cast<uint64_t>(c));
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[class_rng.uniform_int(static_cast<int>(i))]);
    const int base = static_cast<int>(idx.size()) / k;
    const int rem = static_cast<int>(idx.size()) % k;
    size_t cursor = 0;
    for (int f = 0; f < k; ++f) {
      int take = base;
      if (((f - offset) % k + k) % k < rem) ++take;
      for (int t = 0; t < take; ++t) plan.folds[f].push_back(idx[cursor++]);
    }
    offset = (offset + rem) % k;
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

double ConfusionMatrix::total() const {
  double s = 0.0;
  for (const auto& row : counts)
    for (double v : row) s += v;
  return s;
}

double ConfusionMatrix::trace() const {
  double s = 0.0;
  for (int c = 0; c < kNumClasses; ++c) s += counts[c][c];
  return s;
}

MetricSet binary_metrics(double tp, double fp, double fn, double tn) {
  if (tp < 0 || fp < 0 || fn < 0 || tn < 0)
    throw ValidationError("binary_metrics: negative count");
  const double total = tp + fp + fn + tn;
  if (total <= 0.0) throw ValidationError("binary_metrics: all counts zero");
  MetricSet m;
  m.accuracy = (tp + tn) / total;
  if (tp + fp > 0.0) {
    m.precision = tp / (tp + fp);
  } else {
    m.precision = 0.0;
    m.degenerate = true;
  }
  if (tp + fn > 0.0) {
    m.recall = tp / (tp + fn);
  } else {
    m.recall = 0.0;
    m.degenerate = true;
  }
  const double f1_denom = 2.0 * tp + fp + fn;
  if (f1_denom > 0.0) {
    m.f1 = 2.0 * tp / f1_denom;
  } else {
    m.f1 = 0.0;
    m.degenerate = true;
  }
  return m;
}

MetricSet multiclass_metrics(const ConfusionMatrix& confusion, Averaging averaging) {
  const double total = confusion.total();
  if (total <= 0.0) throw ValidationError("multiclass_metrics: empty confusion matrix");
  MetricSet out;
  out.accuracy = confusion.trace() / total;

  double tp_sum = 0, fp_sum = 0, fn_sum = 0, tn_sum = 0;
  double prec = 0, rec = 0, f1 = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double tp = confusion.counts[c][c];
    double fp = 0, fn = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      if (o == c) continue;
      fp += confusion.counts[o][c];
      fn += confusion.counts[c][o];
    }
    const double tn = total - tp - fp - fn;
    const MetricSet b = binary_metrics(tp, fp, fn, tn);
    out.degenerate = out.degenerate || b.degenerate;
    prec += b.precision;
    rec += b.recall;
    f1 += b.f1;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
    tn_sum += tn;
  }
  if (averaging == Averaging::Macro) {
    out.precision = prec / kNumClasses;
    out.recall = rec / kNumClasses;
    out.f1 = f1 / kNumClasses;
  } else {
    const MetricSet micro = binary_metrics(tp_sum, fp_sum, fn_sum, tn_sum);
    out.precision = micro.precision;
    out.recall = micro.recall;
    out.f1 = micro.f1;
    out.degenerate = out.degenerate || micro.degenerate;
  }
  return out;
}

const char* to_string(FeatureSource source) {
  switch (source) {
    case FeatureSource::CnnAe: return "cnn_ae";
    case FeatureSource::RawUpperTriangle: return "raw_upper_triangle";
  }
  return "?";
}

const char* to_string(ClassifierMethod method) {
  switch (method) {
    case ClassifierMethod::It2fr: return "it2fr";
    case ClassifierMethod::Anfis: return "anfis";
    case ClassifierMethod::Knn: return "knn";
    case ClassifierMethod::Mlp: return "mlp";
    case ClassifierMethod::Constant: return "constant";
  }
  return "?";
}

std::optional<FeatureSource> feature_source_from_string(std::string_view s) {
  if (s == "cnn_ae") return FeatureSource::CnnAe;
  if (s == "raw_upper_triangle") return FeatureSource::RawUpperTriangle;
  return std::nullopt;
}

std::optional<ClassifierMethod> classifier_method_from_string(std::string_view s) {
  if (s == "it2fr") return ClassifierMethod::It2fr;
  if (s == "anfis") return ClassifierMethod::Anfis;
  if (s == "knn") return ClassifierMethod::Knn;
  if (s == "mlp") return ClassifierMethod::Mlp;
  if (s == "constant") return ClassifierMethod::Constant;
  return std::nullopt;
}

namespace {

class CnnAeExtractor final : public FeatureExtractor {
 public:
  explicit CnnAeExtractor(const AeConfig& config) : config_(config) {}

  void fit(std::span<const ConnectivityMatrix> train,
           std::span<const ClassLabel> labels, Rng& rng) override {
    const int input_size = train.front().values.rows;
    Network ae = build_autoencoder(input_size);
    Rng init_rng = rng.child(1);
    ae.init_params(init_rng);
    TrainConfig recon;
    recon.optimizer = OptimizerKind::Adam;
    recon.learning_rate = config_.recon_learning_rate > 0.0
                              ? config_.recon_learning_rate
                              : config_.learning_rate;
    recon.epochs = config_.recon_epochs;
    recon.batch_size = config_.batch_size;
    recon.seed = rng.child(2).seed();
    train_reconstruction(ae, train, recon);
    TrainConfig fine = recon;
    fine.learning_rate = config_.finetune_learning_rate > 0.0
                             ? config_.finetune_learning_rate
                             : config_.learning_rate;
    fine.epochs = config_.finetune_epochs;
    fine.seed = rng.child(3).seed();
    auto [net, history] = finetune_classifier(ae, train, labels, fine,
                                              config_.freeze_encoder);
    net_ = std::move(net);
    fitted_ = true;
  }

  std::vector<double> transform(const ConnectivityMatrix& m) const override {
    if (!fitted_) throw Error("cnn_ae extractor used before fit");
    return extract_feature_vector(net_, m);
  }

 private:
  AeConfig config_;
  Network net_;
  bool fitted_ = false;
};

class RawUpperTriangleExtractor final : public FeatureExtractor {
 public:
  void fit(std::span<const ConnectivityMatrix>, std::span<const ClassLabel>,
           Rng&) override {}
  std::vector<double> transform(const ConnectivityMatrix& m) const override {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m.values.rows) * (m.values.rows - 1) / 2);
    for (int i = 0; i < m.values.rows; ++i)
      for (int j = i + 1; j < m.values.cols; ++j)
        out.push_back(m.values(i, j));
    return out;
  }
};

class It2frAdapter final : public Classifier {
 public:
  explicit It2frAdapter(const ClassifierConfig& config) : config_(config) {}
  void fit(const Mat& features, std::span<const ClassLabel> labels,
           Rng& rng) override {
    It2frOptions options;
    options.rules = config_.rules;
    options.fou_delta = config_.fou_delta;
    options.ridge = config_.ridge;
    options.optimizer = config_.optimizer;
    model_ = fit_classifier(features, labels, options, rng);
  }
  ClassLabel predict(std::span<const double> x) const override {
    return classify(model_, x).label;
  }

 private:
  ClassifierConfig config_;
  IT2FRClassifier model_;
};

class AnfisAdapter final : public Classifier {
 public:
  explicit AnfisAdapter(const ClassifierConfig& config) : config_(config) {}
  void fit(const Mat& features, std::span<const ClassLabel> labels,
           Rng& rng) override {
    AnfisOptions options;
    options.rules = config_.rules;
    options.ridge = config_.ridge;
    options.hybrid_iters = config_.anfis_hybrid_iters;
    if (config_.optimizer) {
      options.mode = AnfisTrainMode::Metaheuristic;
      options.optimizer = config_.optimizer;
    }
    model_ = anfis_fit_classifier(features, labels, options, rng);
  }
  ClassLabel predict(std::span<const double> x) const override {
    return anfis_classify(model_, x).label;
  }

 private:
  ClassifierConfig config_;
  AnfisClassifier model_;
};

class KnnAdapter final : public Classifier {
 public:
  explicit KnnAdapter(int k) : k_(k) {}
  void fit(const Mat& features, std::span<const ClassLabel> labels, Rng&) override {
    model_ = knn_fit(features, labels, std::min(k_, features.rows));
  }
  ClassLabel predict(std::span<const double> x) const override {
    return knn_classify(model_, x);
  }

 private:
  int k_;
  KnnModel model_;
};

class MlpAdapter final : public Classifier {
 public:
  explicit MlpAdapter(const ClassifierConfig& config) : config_(config) {}
  void fit(const Mat& features, std::span<const ClassLabel> labels,
           Rng& rng) override {
    MlpOptions options;
    options.train.epochs = config_.mlp_epochs;
    options.train.seed = rng.child(4).seed();
    model_ = mlp_fit(features, labels, options);
  }
  ClassLabel predict(std::span<const double> x) const override {
    return mlp_classify(model_, x);
  }

 private:
  ClassifierConfig config_;
  MlpModel model_;
};

// Chance-level control: always predicts HC.
class ConstantClassifier final : public Classifier {
 public:
  void fit(const Mat&, std::span<const ClassLabel>, Rng&) override {}
  ClassLabel predict(std::span<const double>) const override {
    return ClassLabel::HC;
  }
};

MetricSet elementwise(const std::vector<MetricSet>& sets,
                      const std::function<double(std::span<const double>)>& agg) {
  std::vector<double> acc, prec, rec, f1;
  for (const auto& s : sets) {
    acc.push_back(s.accuracy);
    prec.push_back(s.precision);
    rec.push_back(s.recall);
    f1.push_back(s.f1);
  }
  MetricSet out;
  out.accuracy = agg(acc);
  out.precision = agg(prec);
  out.recall = agg(rec);
  out.f1 = agg(f1);
  return out;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::unique_ptr<FeatureExtractor> make_feature_extractor(const PipelineSpec& spec) {
  switch (spec.feature_source) {
    case FeatureSource::CnnAe:
      return std::make_unique<CnnAeExtractor>(spec.ae);
    case FeatureSource::RawUpperTriangle:
      return std::make_unique<RawUpperTriangleExtractor>();
  }
  throw Error("make_feature_extractor: unknown source");
}

std::unique_ptr<Classifier> make_classifier(const ClassifierConfig& config) {
  switch (config.method) {
    case ClassifierMethod::It2fr: return std::make_unique<It2frAdapter>(config);
    case ClassifierMethod::Anfis: return std::make_unique<AnfisAdapter>(config);
    case ClassifierMethod::Knn: return std::make_unique<KnnAdapter>(config.knn_k);
    case ClassifierMethod::Mlp: return std::make_unique<MlpAdapter>(config);
    case ClassifierMethod::Constant: return std::make_unique<ConstantClassifier>();
  }
  throw Error("make_classifier: unknown method");
}

namespace {

std::string method_name_of(const PipelineSpec& spec) {
  std::string name = to_string(spec.classifier.method);
  if (spec.classifier.optimizer &&
      (spec.classifier.method == ClassifierMethod::It2fr ||
       spec.classifier.method == ClassifierMethod::Anfis)) {
    name += "-";
    name += to_string(spec.classifier.optimizer->kind);
  }
  return name;
}

template <typename MakeFeatures>
EvalReport run_folds(std::span<const ClassLabel> labels, const PipelineSpec& spec,
                     const FoldPlan& plan, MakeFeatures&& features_for_fold) {
  const int n = static_cast<int>(labels.size());
  EvalReport report;
  report.n_subjects = n;
  report.k = plan.k;
  report.method_name = method_name_of(spec);

  std::vector<char> in_test(n);
  const int n_folds = static_cast<int>(plan.folds.size());
  for (int f = 0; f < n_folds; ++f) {
    std::fill(in_test.begin(), in_test.end(), 0);
    for (int idx : plan.folds[f]) in_test[idx] = 1;
    std::vector<int> train_idx, test_idx;
    for (int i = 0; i < n; ++i)
      (in_test[i] ? test_idx : train_idx).push_back(i);
    if (test_idx.empty()) continue;

    std::array<int, kNumClasses> counts{};
    for (int i : train_idx) ++counts[static_cast<int>(labels[i])];
    for (int c = 0; c < kNumClasses; ++c)
      if (counts[c] == 0)
        throw Error("cross_validate: fold " + std::to_string(f) +
                    " training split lost class " +
                    to_string(static_cast<ClassLabel>(c)));

    Rng fold_rng = Rng(spec.seed).child(static_cast<uint64_t>(f) + 1);
    auto [train_features, test_features] =
        features_for_fold(train_idx, test_idx, fold_rng);

    std::vector<ClassLabel> train_labels;
    train_labels.reserve(train_idx.size());
    for (int i : train_idx) train_labels.push_back(labels[i]);

    auto classifier = make_classifier(spec.classifier);
    Rng clf_rng = fold_rng.child(0xc1f);
    classifier->fit(train_features, train_labels, clf_rng);

    ConfusionMatrix confusion;
    for (size_t t = 0; t < test_idx.size(); ++t) {
      const ClassLabel pred = classifier->predict(test_features.row(static_cast<int>(t)));
      confusion.counts[static_cast<int>(labels[test_idx[t]])][static_cast<int>(pred)] += 1.0;
    }
    report.fold_confusions.push_back(confusion);
    report.fold_metrics.push_back(multiclass_metrics(confusion));
  }

  report.mean = elementwise(report.fold_metrics, mean_of);
  report.stddev = elementwise(report.fold_metrics, sample_std);
  ConfusionMatrix pooled;
  for (const auto& cm : report.fold_confusions)
    for (int a = 0; a < kNumClasses; ++a)
      for (int b = 0; b < kNumClasses; ++b)
        pooled.counts[a][b] += cm.counts[a][b];
  report.pooled = multiclass_metrics(pooled);
  const double inv_k = 1.0 / static_cast<double>(report.fold_confusions.size());
  report.averaged = pooled;
  for (auto& row : report.averaged.counts)
    for (double& v : row) v *= inv_k;
  return report;
}

}  // namespace

EvalReport cross_validate(std::span<const SubjectRecord> subjects,
                          const PipelineSpec& spec, const FoldPlan& plan,
                          const ExtractorFactory& factory) {
  std::vector<ConnectivityMatrix> matrices;
  matrices.reserve(subjects.size());
  std::vector<ClassLabel> labels;
  labels.reserve(subjects.size());
  for (const auto& s : subjects) {
    matrices.push_back(connectivity_matrix(s));
    labels.push_back(s.label);
  }

  auto features_for_fold = [&](const std::vector<int>& train_idx,
                               const std::vector<int>& test_idx, Rng& fold_rng) {
    std::vector<ConnectivityMatrix> train_mats;
    std::vector<ClassLabel> train_labels;
    train_mats.reserve(train_idx.size());
    for (int i : train_idx) {
      train_mats.push_back(matrices[i]);
      train_labels.push_back(labels[i]);
    }
    auto extractor = factory ? factory() : make_feature_extractor(spec);
    Rng fit_rng = fold_rng.child(0xfea7);
    // training subjects only reach the extractor fit
    extractor->fit(train_mats, train_labels, fit_rng);

    auto fill = [&](const std::vector<int>& idx) {
      Mat out;
      for (size_t t = 0; t < idx.size(); ++t) {
        const auto f = extractor->transform(matrices[idx[t]]);
        if (out.rows == 0) out = Mat(static_cast<int>(idx.size()), static_cast<int>(f.size()));
        std::copy(f.begin(), f.end(), out.row(static_cast<int>(t)).begin());
      }
      return out;
    };
    return std::make_pair(fill(train_idx), fill(test_idx));
  };

  return run_folds(labels, spec, plan, features_for_fold);
}

EvalReport cross_validate_features(const Mat& features,
                                   std::span<const ClassLabel> labels,
                                   const PipelineSpec& spec, const FoldPlan& plan) {
  if (features.rows != static_cast<int>(labels.size()))
    throw ValidationError("cross_validate_features: size mismatch");
  auto features_for_fold = [&](const std::vector<int>& train_idx,
                               const std::vector<int>& test_idx, Rng&) {
    auto fill = [&](const std::vector<int>& idx) {
      Mat out(static_cast<int>(idx.size()), features.cols);
      for (size_t t = 0; t < idx.size(); ++t) {
        const auto row = features.row(idx[t]);
        std::copy(row.begin(), row.end(), out.row(static_cast<int>(t)).begin());
      }
      return out;
    };
    return std::make_pair(fill(train_idx), fill(test_idx));
  };
  return run_folds(labels, spec, plan, features_for_fold);
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "section,fold,accuracy,precision,recall,f1\n";
  for (size_t f = 0; f < report.fold_metrics.size(); ++f) {
    const auto& m = report.fold_metrics[f];
    out += "fold," + std::to_string(f) + ',' + format_double(m.accuracy) + ',' +
           format_double(m.precision) + ',' + format_double(m.recall) + ',' +
           format_double(m.f1) + '\n';
  }
  auto row = [&](const char* name, const MetricSet& m) {
    out += std::string(name) + ",," + format_double(m.accuracy) + ',' +
           format_double(m.precision) + ',' + format_double(m.recall) + ',' +
           format_double(m.f1) + '\n';
  };
  row("mean", report.mean);
  row("std", report.stddev);
  row("pooled", report.pooled);
  return out;
}

std::string confusion_to_csv(const ConfusionMatrix& confusion) {
  std::string out;
  for (int a = 0; a < kNumClasses; ++a) {
    for (int b = 0; b < kNumClasses; ++b) {
      if (b) out += ',';
      out += format_double(confusion.counts[a][b]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  out << "Method\tAcc (%)\tPrec (%)\tRec (%)\tF1 (%)\n";
  out << report.method_name << '\t' << pct(report.mean.accuracy) << '\t'
      << pct(report.mean.precision) << '\t' << pct(report.mean.recall) << '\t'
      << pct(report.mean.f1) << '\n';
  out << report.method_name << " (pooled)\t" << pct(report.pooled.accuracy) << '\t'
      << pct(report.pooled.precision) << '\t' << pct(report.pooled.recall) << '\t'
      << pct(report.pooled.f1) << '\n';
  out << "\nAveraged confusion matrix (rows = true class, cols = predicted):\n";
  out << "\tHC\tSZ\tADHD\n";
  const char* names[3] = {"HC", "SZ", "ADHD"};
  for (int a = 0; a < kNumClasses; ++a) {
    out << names[a];
    for (int b = 0; b < kNumClasses; ++b) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3f", report.averaged.counts[a][b]);
      out << '\t' << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace fcfuzz
