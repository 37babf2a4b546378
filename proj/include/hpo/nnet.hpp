// Copyright 2026 The hpo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#pragma once

// Convolutional classifier family: b blocks of c same-padded s x s conv
// layers with 2^r filters (ReLU after each), each block closed by a 2x2
// max-pool, then two ReLU fully connected layers and a softmax output.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hpo/datagen.hpp"
#include "hpo/space.hpp"

namespace hpo::nnet {

enum class Preset { Desk, Paper };

std::string_view to_string(Preset p);
Preset preset_from_string(std::string_view s);

struct PresetShape {
  int input_side;
  std::vector<int> fc_widths;
  std::uint64_t max_params;
};

/// Desk: 16 px input, FC 128/64, at most 2e6 parameters.
/// Paper: 64 px input, FC 4096/1024, no parameter cap.
PresetShape preset_shape(Preset p);

struct NetSpec {
  int input_side = 16;
  int input_channels = 1;
  int blocks = 1;
  int convs_per_block = 1;
  int filters = 4;
  int filter_size = 3;
  std::vector<int> fc_widths{128, 64};
  int num_classes = kNumClasses;

  /// Spatial side after the last pool.
  int final_side() const { return input_side >> blocks; }
  int flat_features() const { return filters * final_side() * final_side(); }

  /// Closed-form count of weights and biases.
  std::uint64_t parameter_count() const;
  /// Multiply-accumulates of one forward pass.
  double forward_macs() const;

  std::string describe() const;
  /// FNV-1a of describe(); keys weight files and model caches.
  std::uint64_t hash() const;

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

class SpatialCollapseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParameterCapError : public std::invalid_argument {
 public:
  ParameterCapError(std::uint64_t count, std::uint64_t cap)
      : std::invalid_argument("network has " + std::to_string(count) + " parameters, cap is " +
                              std::to_string(cap)),
        count_(count), cap_(cap) {}
  std::uint64_t count() const { return count_; }
  std::uint64_t cap() const { return cap_; }

 private:
  std::uint64_t count_, cap_;
};

/// Hyper-parameters read off a point of the default space by dimension name.
struct HyperParams {
  int blocks = 1;
  int convs_per_block = 1;
  int filters = 4;
  int filter_size = 3;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 10;
  bool augment = false;
};

HyperParams hyper_params(const ParamSpace& space, const ParamPoint& p);

/// Materializes the architecture of `p`. Throws SpatialCollapseError when the
/// pools shrink the input below 1x1 and ParameterCapError when the preset's
/// cap (or `max_params`, if given) is exceeded.
NetSpec build(const ParamSpace& space, const ParamPoint& p, Preset preset,
              std::optional<std::uint64_t> max_params = std::nullopt);
NetSpec build(const HyperParams& hp, const PresetShape& shape);

struct TrainParams {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 10;
  double momentum = 0.9;  // Nesterov
  double decay = 1e-6;    // lr_t = lr / (1 + decay * t), t = step count
  bool augment = false;
  /// Augmented images per epoch, as a multiple of the training-set size.
  int augment_factor = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

TrainParams train_params(const HyperParams& hp, std::uint64_t seed);

/// Weights and biases, one matrix/vector per parametrized layer, in
/// declaration order (conv layers first, then dense layers).
/// Conv weights are filters x (s*s*in_channels) with column index
/// (ky * s + kx) * in_channels + channel.
template <typename Scalar>
struct Parameters {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  std::size_t size() const;
  Parameters zeros_like() const;
  void set_zero();
  Vector flatten() const;
  void assign(const Vector& flat);
};

/// Stable softmax of each column.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Scalar m = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - m).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

/// Mean over columns of w[label] * -log(max(p[label], 1e-12)).
/// `probs` holds one probability vector per column.
template <typename Derived>
double weighted_cross_entropy(const Eigen::MatrixBase<Derived>& probs, std::span<const int> labels,
                              std::span<const double> class_weights) {
  if (probs.cols() == 0 || labels.empty()) throw std::invalid_argument("weighted_cross_entropy: empty batch");
  if (static_cast<std::size_t>(probs.cols()) != labels.size())
    throw std::invalid_argument("weighted_cross_entropy: label count mismatch");
  double sum = 0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    const double p = std::max(static_cast<double>(probs(y, j)), 1e-12);
    sum += class_weights[static_cast<std::size_t>(y)] * -std::log(p);
  }
  return sum / static_cast<double>(probs.cols());
}

template <typename Scalar>
class Network {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit Network(NetSpec spec);

  const NetSpec& spec() const { return spec_; }
  Parameters<Scalar>& params() { return params_; }
  const Parameters<Scalar>& params() const { return params_; }

  /// He-style uniform init, bound sqrt(6 / fan_in); zero biases.
  void initialize(std::mt19937_64& rng);

  Vector logits(const Image& image) const;
  Vector predict_proba(const Image& image) const;

  /// Weighted cross-entropy over the batch; writes the gradient of that mean
  /// loss into `grad` (same shapes as params()).
  double loss_and_gradient(std::span<const Image* const> images, std::span<const int> labels,
                           std::span<const double> class_weights, Parameters<Scalar>& grad) const;

  double loss(std::span<const Image* const> images, std::span<const int> labels,
              std::span<const double> class_weights) const;

 private:
  struct ConvShape {
    int in_channels, out_channels, size, side;
  };
  struct Trace;

  void forward(const Image& image, Trace* trace, Vector& logits) const;

  NetSpec spec_;
  std::vector<ConvShape> convs_;  // one per conv layer
  std::vector<int> pool_after_;   // conv index after which a pool follows
  Parameters<Scalar> params_;
};

/// Exhaustive count over the allocated weight tensors.
template <typename Scalar>
std::uint64_t enumerate_parameters(const Network<Scalar>& net) {
  return net.params().size();
}

/// One Nesterov-momentum SGD update, Keras convention:
///   v = m * v - lr * g;  w = w + m * v - lr * g
template <typename Scalar>
void sgd_step(Parameters<Scalar>& params, Parameters<Scalar>& velocity, const Parameters<Scalar>& grad,
              Scalar lr, Scalar momentum);

struct Metrics {
  double train_loss = 0;
  double val_loss = 0;
  double val_error = 0;
  std::uint64_t steps = 0;
  bool diverged = false;
};

struct TrainedNet {
  Network<float> net;
  Metrics metrics;

  const NetSpec& spec() const { return net.spec(); }
  Eigen::VectorXd predict_proba(const Image& image) const;
};

/// Per-step observer: step index and batch loss.
using StepObserver = std::function<void(std::uint64_t, double)>;

/// Mini-batch SGD from a fresh seeded init. Deterministic given tp.seed.
/// Stops early and flags divergence on a non-finite batch loss; also flags a
/// validation loss above 10 x ln(K).
TrainedNet train(const NetSpec& spec, const LabeledImages& train_set, const LabeledImages& val_set,
                 std::span<const double> class_weights, const TrainParams& tp, const StepObserver& observer = {});
TrainedNet train(const NetSpec& spec, const SliceDataset& data, const TrainParams& tp);

struct Evaluation {
  double loss = 0;
  double error = 0;
};
Evaluation evaluate(const TrainedNet& net, const LabeledImages& set, std::span<const double> class_weights);

// -------------------------------------------------------------- augmentation

struct AugmentParams {
  double shift_x = 0;  // pixels
  double shift_y = 0;
  double rotation = 0;  // radians
  double shear = 0;
  double zoom = 1;
  double noise_sigma = 0;
};

/// Translation within 10% of the side, rotation within 15 degrees, shear
/// within 0.1, zoom in [0.9, 1.1], noise sigma in [0, 0.05].
AugmentParams draw_augment(int side, std::mt19937_64& rng);

/// Affine resampling (bilinear, edge clamped) plus Gaussian noise, clamped to
/// [0, 1].
Image apply_augment(const Image& image, const AugmentParams& params, std::mt19937_64& rng);

Image augment(const Image& image, std::mt19937_64& rng);

// -------------------------------------------------------------- weight files
//
// Little-endian layout:
//   "HPONET01"                       8 bytes
//   u64 spec hash
//   u32 tensor count T
//   T x (u32 rows, u32 cols)         biases have cols = 1
//   float32 values, tensor by tensor in declaration order, row-major

void write_weights(std::ostream& os, const TrainedNet& net);
TrainedNet read_weights(std::istream& is, const NetSpec& spec);
void save_weights(const std::filesystem::path& path, const TrainedNet& net);
TrainedNet load_weights(const std::filesystem::path& path, const NetSpec& spec);

}  // namespace hpo::nnet
