#include "fcfuzz/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fcfuzz {

KnnModel knn_fit(const Mat& features, std::span<const ClassLabel> labels, int k) {
  if (features.rows != static_cast<int>(labels.size()))
    throw ValidationError("knn_fit: features/labels size mismatch");
  if (features.rows == 0) throw ValidationError("knn_fit: empty training set");
  if (k < 1 || k > features.rows)
    throw ValidationError("knn_fit: k = " + std::to_string(k) +
                          " out of range for " + std::to_string(features.rows) +
                          " samples");
  return {features, {labels.begin(), labels.end()}, k};
}

ClassLabel knn_classify(const KnnModel& model, std::span<const double> x) {
  const int n = model.points.rows;
  if (n == 0) throw ValidationError("knn_classify: empty model");
  if (model.k > n) throw ValidationError("knn_classify: k exceeds stored samples");
  if (static_cast<int>(x.size()) != model.points.cols)
    throw ValidationError("knn_classify: dimension mismatch");

  std::vector<std::pair<double, int>> dist(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    const auto row = model.points.row(i);
    for (size_t j = 0; j < x.size(); ++j) {
      const double d = row[j] - x[j];
      s += d * d;
    }
    dist[i] = {s, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + model.k, dist.end());

  std::array<int, kNumClasses> votes{};
  std::array<double, kNumClasses> summed{};
  for (int i = 0; i < model.k; ++i) {
    const int c = static_cast<int>(model.labels[dist[i].second]);
    ++votes[c];
    summed[c] += std::sqrt(dist[i].first);
  }
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (votes[c] > votes[best]) {
      best = c;
    } else if (votes[c] == votes[best] && votes[c] > 0 &&
               summed[c] < summed[best]) {
      best = c;
    }
  }
  return static_cast<ClassLabel>(best);
}

MlpModel mlp_fit(const Mat& features, std::span<const ClassLabel> labels,
                 const MlpOptions& options) {
  const int n = features.rows;
  if (n != static_cast<int>(labels.size()))
    throw ValidationError("mlp_fit: features/labels size mismatch");
  std::array<int, kNumClasses> counts{};
  for (ClassLabel l : labels) ++counts[static_cast<int>(l)];
  for (int c = 0; c < kNumClasses; ++c)
    if (counts[c] == 0)
      throw ValidationError(std::string("mlp_fit: class ") +
                            to_string(static_cast<ClassLabel>(c)) +
                            " has no samples");

  MlpModel model;
  model.net.add(make_dense(features.cols, options.hidden1));
  model.net.add(make_relu());
  model.net.add(make_dense(options.hidden1, options.hidden2));
  model.net.add(make_relu());
  model.net.add(make_dense(options.hidden2, kNumClasses));
  model.net.add(make_softmax());
  Rng rng(options.train.seed);
  model.net.init_params(rng);

  std::vector<Tensor> inputs;
  inputs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto row = features.row(i);
    inputs.push_back(Tensor::flat({row.begin(), row.end()}));
  }

  Optimizer opt(options.train.optimizer, options.train.learning_rate);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.train.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(static_cast<int>(i))]);
    for (int start = 0; start < n; start += options.train.batch_size) {
      const int end = std::min(n, start + options.train.batch_size);
      std::vector<Tensor> batch;
      std::vector<int> batch_labels;
      for (int i = start; i < end; ++i) {
        batch.push_back(inputs[order[i]]);
        batch_labels.push_back(static_cast<int>(labels[order[i]]));
      }
      train_step(model.net, opt, batch, std::span<const int>(batch_labels));
    }
  }
  return model;
}

ClassLabel mlp_classify(const MlpModel& model, std::span<const double> x) {
  const Tensor out = model.net.forward(Tensor::flat({x.begin(), x.end()}));
  const int best = static_cast<int>(
      std::max_element(out.v.begin(), out.v.end()) - out.v.begin());
  return static_cast<ClassLabel>(best);
}

}  // namespace fcfuzz
