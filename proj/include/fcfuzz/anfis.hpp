#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "fcfuzz/data_model.hpp"
#include "fcfuzz/fcm.hpp"
#include "fcfuzz/matrix.hpp"
#include "fcfuzz/metaheuristics.hpp"

namespace fcfuzz {

// First-order TSK rule: type-1 Gaussian premises, linear consequent
// (coeffs[0] = bias).
struct AnfisRule {
  std::vector<GaussianMF> premises;
  std::vector<double> coeffs;
};

struct AnfisModel {
  std::vector<AnfisRule> rules;
  int feature_dim = 0;
};

// Normalized product firing (log-domain) times the linear consequents.
double anfis_predict(const AnfisModel& model, std::span<const double> x);

enum class AnfisTrainMode { Hybrid, Metaheuristic };

struct AnfisOptions {
  int rules = 3;
  double ridge = 1e-6;
  AnfisTrainMode mode = AnfisTrainMode::Hybrid;
  int hybrid_iters = 20;
  double premise_learning_rate = 1e-3;
  std::optional<MetaheuristicSpec> optimizer;  // Metaheuristic mode
};

// FCM-initialized premises; consequents from one global ridge least-squares
// pass. Hybrid mode then alternates premise gradient steps with consequent
// re-solves, reverting any step that worsens training RMSE, so the RMSE
// sequence is non-increasing. Metaheuristic mode optimizes the full
// parameter vector instead.
AnfisModel anfis_fit(const Mat& features, std::span<const double> targets,
                     const AnfisOptions& options, Rng& rng);

// Training RMSE trace: entry 0 is the initialization, one entry per
// hybrid iteration after that.
AnfisModel anfis_fit(const Mat& features, std::span<const double> targets,
                     const AnfisOptions& options, Rng& rng,
                     std::vector<double>* rmse_history);

// Global least-squares solve of all consequents with premises fixed.
void anfis_solve_consequents(AnfisModel& model, const Mat& features,
                             std::span<const double> targets, double ridge);

// Analytic d(MSE)/d(mean), d(MSE)/d(sigma) for every premise.
struct AnfisPremiseGrads {
  std::vector<std::vector<double>> d_mean;   // [rule][dim]
  std::vector<std::vector<double>> d_sigma;  // [rule][dim]
};
AnfisPremiseGrads anfis_premise_gradients(const AnfisModel& model,
                                          const Mat& features,
                                          std::span<const double> targets);

struct AnfisClassifier {
  std::array<AnfisModel, kNumClasses> models;  // one-vs-rest
};

AnfisClassifier anfis_fit_classifier(const Mat& features,
                                     std::span<const ClassLabel> labels,
                                     const AnfisOptions& options, Rng& rng);

struct AnfisScores {
  ClassLabel label = ClassLabel::HC;
  std::array<double, kNumClasses> scores{};
};
AnfisScores anfis_classify(const AnfisClassifier& classifier,
                           std::span<const double> x);

void save_anfis(const AnfisClassifier& classifier, const std::filesystem::path& path);
AnfisClassifier load_anfis(const std::filesystem::path& path);

}  // namespace fcfuzz
