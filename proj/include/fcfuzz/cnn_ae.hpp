#pragma once

#include <span>
#include <utility>
#include <vector>

#include "fcfuzz/connectivity.hpp"
#include "fcfuzz/nn.hpp"

namespace fcfuzz {

// Encoder = 3 x (Conv3x3 + ReLU + ceil MaxPool2x2), channels 1 -> 32 -> 32 -> 1.
constexpr int kEncoderLayerCount = 9;

// Bottleneck spatial side after three ceil-halvings of input_size.
int bottleneck_side(int input_size);

// Full autoencoder: encoder as above, decoder
// Conv(1->1)+ReLU, Up, Conv(1->32)+ReLU, Up, Conv(32->32)+ReLU, Up,
// CenterCrop to input_size, Conv(32->1)+Tanh. Weights uninitialized.
Network build_autoencoder(int input_size = 118);

// Encoder copied from a trained autoencoder plus Dense(bottleneck^2 -> 3)
// and Softmax. The dense head is freshly initialized from rng.
Network build_finetune_classifier(const Network& autoencoder, int input_size,
                                  Rng& rng);

struct TrainHistory {
  std::vector<double> loss;      // per epoch
  std::vector<double> accuracy;  // per epoch (running training accuracy)
};

Tensor matrix_to_tensor(const ConnectivityMatrix& m);

// Minimizes mean squared reconstruction error. Shuffles per epoch from
// config.seed; deterministic.
TrainHistory train_reconstruction(Network& autoencoder,
                                  std::span<const ConnectivityMatrix> matrices,
                                  const TrainConfig& config);

// Discards the decoder, attaches the softmax head and trains with
// cross-entropy on the three labels. Requires every class to be present.
std::pair<Network, TrainHistory> finetune_classifier(
    const Network& autoencoder, std::span<const ConnectivityMatrix> matrices,
    std::span<const ClassLabel> labels, const TrainConfig& config,
    bool freeze_encoder = false);

// Flattened post-pool bottleneck (row-major), one row per subject.
// Works on any network whose first kEncoderLayerCount layers are the encoder.
Mat extract_features(const Network& net,
                     std::span<const ConnectivityMatrix> matrices);

std::vector<double> extract_feature_vector(const Network& net,
                                           const ConnectivityMatrix& matrix);

}  // namespace fcfuzz
