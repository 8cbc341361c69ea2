#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "fcfuzz/common.hpp"

namespace fcfuzz {

enum class LayerKind : uint32_t {
  Conv2D = 0,
  MaxPool2x2 = 1,
  UpsampleNearest2x = 2,
  Dense = 3,
  ReLU = 4,
  Tanh = 5,
  Softmax = 6,
  CenterCrop = 7,
};

const char* to_string(LayerKind kind);

// H x W x C tensor stored as C planes of H x W rows (planar layout):
// index = (ch*h + y)*w + x. Dense layers treat the buffer as a flat vector
// of size h*w*c.
struct Tensor {
  int h = 1;
  int w = 1;
  int c = 1;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int h_, int w_, int c_)
      : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_, 0.0) {}
  static Tensor flat(std::vector<double> data);

  int size() const { return h * w * c; }
  double& at(int y, int x, int ch) {
    return v[(static_cast<size_t>(ch) * h + y) * w + x];
  }
  double at(int y, int x, int ch) const {
    return v[(static_cast<size_t>(ch) * h + y) * w + x];
  }
  double* plane(int ch) { return v.data() + static_cast<size_t>(ch) * h * w; }
  const double* plane(int ch) const {
    return v.data() + static_cast<size_t>(ch) * h * w;
  }
  bool all_finite() const;
};

// Per-layer context recorded during a taped forward pass and consumed by
// backward. Layers use only the fields they need.
struct TapeEntry {
  Tensor saved;                // input copy (conv/dense) or output copy (activations)
  std::vector<int32_t> arg;    // maxpool source indices
  std::array<int, 3> in_shape{0, 0, 0};
};
using Tape = std::vector<TapeEntry>;

// Per-layer parameter gradients, structure-parallel to the network layers.
using Gradients = std::vector<std::vector<double>>;

class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  // tape == nullptr runs inference-only (nothing recorded).
  virtual Tensor forward(const Tensor& in, TapeEntry* tape) const = 0;
  // Accumulates parameter gradients into *pgrad (pre-sized, +=).
  virtual Tensor backward(const Tensor& grad_out, const TapeEntry& tape,
                          std::vector<double>* pgrad) const = 0;
  virtual std::span<double> params() { return {}; }
  virtual std::span<const double> params() const { return {}; }
  virtual void init_params(Rng&) {}
  // Integers that, with the kind, fully describe the layer for checkpoints.
  virtual std::array<int, 2> meta() const { return {0, 0}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

// 3x3 cross-correlation, stride 1, zero same-padding; spatial size preserved.
// Weight layout: w[((ci*3 + ky)*3 + kx)*c_out + co], then c_out biases.
std::unique_ptr<Layer> make_conv2d(int c_in, int c_out);
// 2x2 max pooling with ceil semantics: edge windows may cover a single cell.
std::unique_ptr<Layer> make_maxpool2x2();
std::unique_ptr<Layer> make_upsample2x();
std::unique_ptr<Layer> make_dense(int in, int out);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_tanh();
std::unique_ptr<Layer> make_softmax();
// Crops the spatial center down to target_h x target_w.
std::unique_ptr<Layer> make_center_crop(int target_h, int target_w);

class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add(std::unique_ptr<Layer> layer);
  int layer_count() const { return static_cast<int>(layers_.size()); }
  Layer& layer(int i) { return *layers_[i]; }
  const Layer& layer(int i) const { return *layers_[i]; }

  Tensor forward(const Tensor& in, Tape* tape = nullptr) const;
  // Runs only layers [0, n_layers); used to read intermediate representations.
  Tensor forward_prefix(const Tensor& in, int n_layers, Tape* tape = nullptr) const;
  // Reverse pass from dLoss/dOutput; accumulates into grads, returns dLoss/dInput.
  Tensor backward(const Tensor& grad_out, const Tape& tape, Gradients& grads) const;

  Gradients zero_gradients() const;
  size_t param_count() const;
  void init_params(Rng& rng);
  Network clone() const;

  void save(const std::filesystem::path& path) const;
  static Network load(const std::filesystem::path& path);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct LossGrad {
  double value = 0.0;
  Tensor grad;
};

// Mean squared error over all elements.
LossGrad mse_loss(const Tensor& pred, const Tensor& target);
// Cross-entropy on probabilities (post-softmax) against a class index.
LossGrad cross_entropy_loss(const Tensor& probs, int target_class);

enum class OptimizerKind { SGD, Adam };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  int epochs = 1;
  int batch_size = 8;
  uint64_t seed = 0;
};

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate);
  void step(Network& net, const Gradients& grads);
  // Layers whose parameters are left untouched by step().
  void freeze_layers(std::vector<int> layer_indices);

 private:
  OptimizerKind kind_;
  double lr_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
  std::vector<int> frozen_;
};

// One optimizer step on a batch: forward + reverse per sample, gradients
// averaged over the batch. Returns mean loss; throws Error on non-finite loss.
double train_step(Network& net, Optimizer& opt, std::span<const Tensor> inputs,
                  std::span<const Tensor> mse_targets);
// predicted, when given, receives the pre-update argmax class per sample.
double train_step(Network& net, Optimizer& opt, std::span<const Tensor> inputs,
                  std::span<const int> class_labels,
                  std::vector<int>* predicted = nullptr);

}  // namespace fcfuzz
