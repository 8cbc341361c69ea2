#include "fcfuzz/cnn_ae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fcfuzz {

int bottleneck_side(int input_size) {
  int s = input_size;
  for (int i = 0; i < 3; ++i) s = (s + 1) / 2;
  return s;
}

Network build_autoencoder(int input_size) {
  if (input_size < 8)
    throw ValidationError("build_autoencoder: input_size must be >= 8, got " +
                          std::to_string(input_size));
  Network net;
  // encoder
  net.add(make_conv2d(1, 32));
  net.add(make_relu());
  net.add(make_maxpool2x2());
  net.add(make_conv2d(32, 32));
  net.add(make_relu());
  net.add(make_maxpool2x2());
  net.add(make_conv2d(32, 1));
  net.add(make_relu());
  net.add(make_maxpool2x2());
  // decoder
  net.add(make_conv2d(1, 1));
  net.add(make_relu());
  net.add(make_upsample2x());
  net.add(make_conv2d(1, 32));
  net.add(make_relu());
  net.add(make_upsample2x());
  net.add(make_conv2d(32, 32));
  net.add(make_relu());
  net.add(make_upsample2x());
  net.add(make_center_crop(input_size, input_size));
  net.add(make_conv2d(32, 1));
  net.add(make_tanh());
  return net;
}

Network build_finetune_classifier(const Network& autoencoder, int input_size,
                                  Rng& rng) {
  if (autoencoder.layer_count() < kEncoderLayerCount)
    throw Error("build_finetune_classifier: network is not an autoencoder");
  Network net;
  for (int i = 0; i < kEncoderLayerCount; ++i)
    net.add(autoencoder.layer(i).clone());
  const int side = bottleneck_side(input_size);
  auto dense = make_dense(side * side, kNumClasses);
  dense->init_params(rng);
  net.add(std::move(dense));
  net.add(make_softmax());
  return net;
}

Tensor matrix_to_tensor(const ConnectivityMatrix& m) {
  Tensor t(m.values.rows, m.values.cols, 1);
  t.v = m.values.v;
  return t;
}

namespace {

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config) {
  return std::make_unique<Optimizer>(config.optimizer, config.learning_rate);
}

void check_inputs(std::span<const ConnectivityMatrix> matrices) {
  if (matrices.empty()) throw ValidationError("training: empty dataset");
  const int r = matrices.front().values.rows;
  for (const auto& m : matrices)
    if (m.values.rows != r || m.values.cols != r)
      throw ValidationError("training: subject '" + m.subject_id +
                            "' matrix shape mismatch");
}

}  // namespace

TrainHistory train_reconstruction(Network& autoencoder,
                                  std::span<const ConnectivityMatrix> matrices,
                                  const TrainConfig& config) {
  check_inputs(matrices);
  std::vector<Tensor> tensors;
  tensors.reserve(matrices.size());
  for (const auto& m : matrices) tensors.push_back(matrix_to_tensor(m));

  auto opt = make_optimizer(config);
  Rng rng(config.seed);
  std::vector<int> order(tensors.size());
  std::iota(order.begin(), order.end(), 0);

  TrainHistory history;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(static_cast<int>(i))]);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(tensors[order[i]]);
      epoch_loss += train_step(autoencoder, *opt, batch, std::span<const Tensor>(batch));
      ++batches;
    }
    history.loss.push_back(epoch_loss / batches);
  }
  return history;
}

std::pair<Network, TrainHistory> finetune_classifier(
    const Network& autoencoder, std::span<const ConnectivityMatrix> matrices,
    std::span<const ClassLabel> labels, const TrainConfig& config,
    bool freeze_encoder) {
  check_inputs(matrices);
  if (matrices.size() != labels.size())
    throw ValidationError("finetune: matrices/labels size mismatch");
  std::array<int, kNumClasses> counts{};
  for (ClassLabel l : labels) ++counts[static_cast<int>(l)];
  for (int c = 0; c < kNumClasses; ++c)
    if (counts[c] == 0)
      throw ValidationError(std::string("finetune: class ") +
                            to_string(static_cast<ClassLabel>(c)) +
                            " has no samples");

  Rng rng(config.seed);
  Network net = build_finetune_classifier(autoencoder, matrices.front().values.rows, rng);
  auto opt = make_optimizer(config);
  if (freeze_encoder) {
    std::vector<int> frozen(kEncoderLayerCount);
    std::iota(frozen.begin(), frozen.end(), 0);
    opt->freeze_layers(std::move(frozen));
  }

  std::vector<Tensor> tensors;
  tensors.reserve(matrices.size());
  for (const auto& m : matrices) tensors.push_back(matrix_to_tensor(m));

  std::vector<int> order(tensors.size());
  std::iota(order.begin(), order.end(), 0);
  TrainHistory history;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(static_cast<int>(i))]);
    double epoch_loss = 0.0;
    int batches = 0;
    int correct = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> batch;
      std::vector<int> batch_labels;
      for (size_t i = start; i < end; ++i) {
        batch.push_back(tensors[order[i]]);
        batch_labels.push_back(static_cast<int>(labels[order[i]]));
      }
      std::vector<int> predicted;
      epoch_loss += train_step(net, *opt, batch, std::span<const int>(batch_labels),
                               &predicted);
      for (size_t i = 0; i < batch.size(); ++i)
        if (predicted[i] == batch_labels[i]) ++correct;
      ++batches;
    }
    history.loss.push_back(epoch_loss / batches);
    history.accuracy.push_back(static_cast<double>(correct) / tensors.size());
  }
  return {std::move(net), std::move(history)};
}

std::vector<double> extract_feature_vector(const Network& net,
                                           const ConnectivityMatrix& matrix) {
  const Tensor bottleneck =
      net.forward_prefix(matrix_to_tensor(matrix), kEncoderLayerCount);
  return bottleneck.v;
}

Mat extract_features(const Network& net,
                     std::span<const ConnectivityMatrix> matrices) {
  check_inputs(matrices);
  const auto first = extract_feature_vector(net, matrices.front());
  Mat features(static_cast<int>(matrices.size()), static_cast<int>(first.size()));
  std::copy(first.begin(), first.end(), features.row(0).begin());
  for (size_t i = 1; i < matrices.size(); ++i) {
    const auto f = extract_feature_vector(net, matrices[i]);
    if (f.size() != first.size())
      throw Error("extract_features: inconsistent feature length");
    std::copy(f.begin(), f.end(), features.row(static_cast<int>(i)).begin());
  }
  return features;
}

}  // namespace fcfuzz
