#pragma once

#include <span>
#include <vector>

#include "fcfuzz/data_model.hpp"
#include "fcfuzz/matrix.hpp"
#include "fcfuzz/nn.hpp"

namespace fcfuzz {

// Brute-force exact nearest neighbours; at ~160 subjects an index would not
// pay for itself.
struct KnnModel {
  Mat points;
  std::vector<ClassLabel> labels;
  int k = 3;
};

KnnModel knn_fit(const Mat& features, std::span<const ClassLabel> labels, int k = 3);

// Majority label among the k nearest (Euclidean). Ties: smallest summed
// distance, then lowest class index. Neighbour order ties break on index.
ClassLabel knn_classify(const KnnModel& model, std::span<const double> x);

struct MlpOptions {
  TrainConfig train{OptimizerKind::Adam, 1e-3, 60, 8, 0};
  int hidden1 = 64;
  int hidden2 = 64;
};

struct MlpModel {
  Network net;
};

// Dense(d->h1)+ReLU, Dense(h1->h2)+ReLU, Dense(h2->3)+Softmax, cross-entropy.
MlpModel mlp_fit(const Mat& features, std::span<const ClassLabel> labels,
                 const MlpOptions& options);

ClassLabel mlp_classify(const MlpModel& model, std::span<const double> x);

}  // namespace fcfuzz
