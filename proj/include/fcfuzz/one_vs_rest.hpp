#pragma once

#include <array>
#include <span>
#include <vector>

#include "fcfuzz/common.hpp"
#include "fcfuzz/data_model.hpp"

namespace fcfuzz {

// Shared one-vs-rest scaffolding for the regression-style classifiers:
// 0/1 targets per class, one independently seeded fit each, argmax decode.

void require_all_classes(std::span<const ClassLabel> labels, const char* who);

// fit(targets, class_rng) -> Model, called once per class with 0/1 targets.
template <typename Model, typename FitFn>
std::array<Model, kNumClasses> fit_one_vs_rest(std::span<const ClassLabel> labels,
                                               Rng& rng, FitFn&& fit) {
  std::array<Model, kNumClasses> models;
  const size_t n = labels.size();
  std::vector<double> targets(n);
  for (int c = 0; c < kNumClasses; ++c) {
    for (size_t i = 0; i < n; ++i)
      targets[i] = (static_cast<int>(labels[i]) == c) ? 1.0 : 0.0;
    Rng fit_rng = rng.child(static_cast<uint64_t>(c));
    models[c] = fit(targets, fit_rng);
  }
  return models;
}

// Argmax over per-class scores; exact ties resolve to the smallest index.
int argmax_class(const std::array<double, kNumClasses>& scores);

}  // namespace fcfuzz
