#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcfuzz/connectivity.hpp"
#include "fcfuzz/data_model.hpp"
#include "fcfuzz/matrix.hpp"
#include "fcfuzz/metaheuristics.hpp"
#include "fcfuzz/nn.hpp"

namespace fcfuzz {

struct FoldPlan {
  int k = 0;
  uint64_t seed = 0;
  std::vector<std::vector<int>> folds;  // disjoint subject indices
  std::vector<std::string> warnings;
};

// Stratified, seeded, deterministic. Per-class counts across folds differ by
// at most one; remainders rotate across classes so fold sizes stay balanced.
FoldPlan make_folds(std::span<const ClassLabel> labels, int k, uint64_t seed);

// Row = true class, column = predicted. Real-valued so fold averages fit.
struct ConfusionMatrix {
  std::array<std::array<double, kNumClasses>, kNumClasses> counts{};
  double total() const;
  double trace() const;
};

struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some zero-denominator metric was defined as 0
};

MetricSet binary_metrics(double tp, double fp, double fn, double tn);

enum class Averaging { Macro, Micro };

// Accuracy = trace/total; precision/recall/F1 averaged over the three
// one-vs-rest reductions (macro by default).
MetricSet multiclass_metrics(const ConfusionMatrix& confusion,
                             Averaging averaging = Averaging::Macro);

enum class FeatureSource { CnnAe, RawUpperTriangle };
enum class ClassifierMethod { It2fr, Anfis, Knn, Mlp, Constant };

const char* to_string(FeatureSource source);
const char* to_string(ClassifierMethod method);
std::optional<FeatureSource> feature_source_from_string(std::string_view s);
std::optional<ClassifierMethod> classifier_method_from_string(std::string_view s);

struct AeConfig {
  int recon_epochs = 50;
  int finetune_epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  // stage-specific overrides; 0 falls back to learning_rate
  double recon_learning_rate = 0.0;
  double finetune_learning_rate = 0.0;
  bool freeze_encoder = false;
};

struct ClassifierConfig {
  ClassifierMethod method = ClassifierMethod::It2fr;
  int rules = 3;
  double fou_delta = 0.2;
  double ridge = 1e-6;
  int knn_k = 3;
  int mlp_epochs = 60;
  int anfis_hybrid_iters = 20;
  std::optional<MetaheuristicSpec> optimizer;
};

struct PipelineSpec {
  FeatureSource feature_source = FeatureSource::CnnAe;
  AeConfig ae;
  ClassifierConfig classifier;
  uint64_t seed = 0;
};

// Fitted per fold on training subjects only; transform is pure.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual void fit(std::span<const ConnectivityMatrix> train,
                   std::span<const ClassLabel> labels, Rng& rng) = 0;
  virtual std::vector<double> transform(const ConnectivityMatrix& m) const = 0;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const Mat& features, std::span<const ClassLabel> labels,
                   Rng& rng) = 0;
  virtual ClassLabel predict(std::span<const double> x) const = 0;
};

std::unique_ptr<FeatureExtractor> make_feature_extractor(const PipelineSpec& spec);
std::unique_ptr<Classifier> make_classifier(const ClassifierConfig& config);

// Override point for the per-fold extractor; empty means the spec default.
using ExtractorFactory = std::function<std::unique_ptr<FeatureExtractor>()>;

struct EvalReport {
  int n_subjects = 0;
  int k = 0;
  std::vector<MetricSet> fold_metrics;
  std::vector<ConfusionMatrix> fold_confusions;
  MetricSet mean;
  MetricSet stddev;  // sample standard deviation over folds
  MetricSet pooled;  // metrics of the summed confusion matrix
  ConfusionMatrix averaged;
  std::string method_name;
};

// Per fold: fit extractor and classifier on the training split only, predict
// the held-out split. Fully seeded; byte-identical reports per (spec, plan).
EvalReport cross_validate(std::span<const SubjectRecord> subjects,
                          const PipelineSpec& spec, const FoldPlan& plan,
                          const ExtractorFactory& factory = {});

// Same harness when features are precomputed (leaks if they were fitted on
// all subjects; callers choose).
EvalReport cross_validate_features(const Mat& features,
                                   std::span<const ClassLabel> labels,
                                   const PipelineSpec& spec, const FoldPlan& plan);

std::string report_to_csv(const EvalReport& report);
std::string report_to_table(const EvalReport& report);
std::string confusion_to_csv(const ConfusionMatrix& confusion);

}  // namespace fcfuzz
