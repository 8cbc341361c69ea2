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

// One rule: interval type-2 Gaussian antecedent per feature dimension plus a
// first-order linear consequent. coeffs[0] is the bias when the model uses
// one; the remaining entries are the per-feature coefficient centers.
struct FuzzyRule {
  std::vector<IT2GaussianMF> antecedents;
  std::vector<double> coeffs;
};

struct IT2FRModel {
  std::vector<FuzzyRule> rules;
  int feature_dim = 0;
  double fou_delta = 0.0;
  bool use_bias = true;
};

struct TypeReducedOutput {
  double y_left = 0.0;
  double y_right = 0.0;
  double y_star = 0.0;
};

struct FiringInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// Product t-norm over the rule's antecedents, evaluated at both bounds.
// Accumulated in log space and exponentiated at the end.
FiringInterval firing_interval(const FuzzyRule& rule, std::span<const double> x);

struct NormalizedStrengths {
  std::vector<double> lower, upper;
  bool underflow = false;  // total firing underflowed; uniform fallback used
};

// Per-bound normalization to unit sum.
NormalizedStrengths normalized_strengths(std::span<const FiringInterval> firings);

// Weighted rule outputs at both bounds, ordered so y_left <= y_right;
// y_star is their midpoint.
TypeReducedOutput predict(const IT2FRModel& model, std::span<const double> x);

// FCM antecedents plus per-rule membership-weighted ridge least squares for
// the consequents. Deterministic per rng state.
IT2FRModel fit_init(const Mat& features, std::span<const double> targets, int rules,
                    double fou_delta, double ridge, Rng& rng, bool use_bias = true);

struct It2frOptions {
  int rules = 3;
  double fou_delta = 0.2;
  double ridge = 1e-6;
  bool use_bias = true;
  std::optional<MetaheuristicSpec> optimizer;
};

struct IT2FRClassifier {
  std::array<IT2FRModel, kNumClasses> models;  // one-vs-rest
};

// One-vs-rest fit with 0/1 targets; when an optimizer is given, the full
// parameter vector (means, sigmas, coefficients) is refined against the
// training mean squared error, never ending worse than the initialization.
// opt_results, when non-null, receives the per-class optimizer runs.
IT2FRClassifier fit_classifier(const Mat& features,
                               std::span<const ClassLabel> labels,
                               const It2frOptions& options, Rng& rng,
                               std::array<OptResult, kNumClasses>* opt_results = nullptr);

struct ClassScores {
  ClassLabel label = ClassLabel::HC;
  std::array<double, kNumClasses> y_star{};
};

// Argmax of the three models' y_star; exact ties resolve to the smallest
// class index.
ClassScores classify(const IT2FRClassifier& classifier, std::span<const double> x);

void save_it2fr(const IT2FRClassifier& classifier, const std::filesystem::path& path);
IT2FRClassifier load_it2fr(const std::filesystem::path& path);

// Optimization helpers shared with the ANFIS trainer.
namespace detail {
// theta layout: rule-major means, then sigma1 block, sigma2 block, coeffs.
std::vector<double> encode_theta(const IT2FRModel& model);
IT2FRModel decode_theta(std::span<const double> theta, const IT2FRModel& shape);
Bounds theta_bounds(const IT2FRModel& model, const Mat& features);
}  // namespace detail

}  // namespace fcfuzz
