#pragma once

// Feed-forward binary-connect network. Latent real weights are binarized to
// +/-1, passed through the faulty memory, and the resulting corrupted signs are
// what the forward pass multiplies with. The backward pass is straight-through:
// gradients computed against the corrupted signs are applied to the latent
// weights as they are.

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "lanmax/faultmem.hpp"

namespace lanmax {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class LayerKind { dense, conv2d };

// Conv layers use stride 1 and zero "same" padding, so the spatial size is
// preserved; the kernel must be odd. Feature maps are flattened as (c, y, x).
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  bool has_bias = false;
  // Fixed multiplier applied to the linear map before the bias. Stands in for
  // the normalization a +/-1 weight matrix otherwise lacks; 1 means none.
  double scale = 1.0;

  static LayerSpec dense(std::size_t in, std::size_t out, bool bias = false, double scale = 1.0);
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                          std::size_t height, std::size_t width, bool bias = false,
                          double scale = 1.0);

  // n_l: stored (faulty) weights only. Biases live in reliable memory.
  std::size_t weight_count() const;
  std::size_t bias_count() const;
  std::size_t input_size() const;
  std::size_t output_size() const;
  void validate() const;

  bool operator==(const LayerSpec&) const = default;
};

struct BinaryNetwork {
  std::vector<LayerSpec> layers;
  std::vector<std::vector<double>> latent;
  std::vector<std::vector<double>> bias;

  // Latent weights ~ U(-init_range, init_range), biases zero.
  static BinaryNetwork create(std::vector<LayerSpec> layers, double init_range, Rng& rng);

  // Throws StructuralError if layers do not chain or arrays have wrong sizes.
  void validate() const;
  std::size_t num_layers() const { return layers.size(); }
  std::size_t input_size() const { return layers.front().input_size(); }
  std::size_t num_classes() const { return layers.back().output_size(); }
  std::vector<std::size_t> layer_sizes() const;
  LayerSigns binary_weights() const;
};

// Elementwise sign with binarize(0) = +1.
SignArray binarize(std::span<const double> latent);

// Logits for a batch (rows are samples). Only `corrupted` is used for the
// linear maps; latent weights play no part.
Matrix forward(const BinaryNetwork& net, const LayerSigns& corrupted, const Matrix& x);

// Mean softmax cross-entropy over the batch (log-sum-exp stabilized).
double inner_loss(const Matrix& logits, std::span<const int> targets);

// Number of rows whose argmax equals the target (first index wins ties).
std::size_t count_correct(const Matrix& logits, std::span<const int> targets);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
  double loss = 0.0;
};

// Gradient of the minibatch mean loss with respect to the corrupted weights,
// returned aligned one-to-one with the latent weights.
Gradients backward_ste(const BinaryNetwork& net, const LayerSigns& corrupted, const Matrix& x,
                       std::span<const int> targets);

struct InnerOptConfig {
  double learning_rate = 0.1;
  double lr_decay_factor = 0.2;
  int lr_decay_period = 60;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 128;
  int epochs = 200;

  void validate() const;
  bool operator==(const InnerOptConfig&) const = default;
};

// eps = eps0 * factor^floor((epoch - 1) / period), epoch counted from 1.
double lr_schedule(int epoch, const InnerOptConfig& cfg);

// Nesterov momentum step shared by the inner and outer optimizers:
//   g' = g + weight_decay * x;  v = momentum * v + g';  x -= lr * (g' + momentum * v)
void nesterov_step(std::span<double> params, std::span<const double> grad,
                   std::span<double> velocity, double lr, double momentum,
                   double weight_decay);

struct InnerVelocity {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static InnerVelocity zeros_like(const BinaryNetwork& net);
};

// One inner SGD update at the scheduled learning rate for `epoch`; latent
// weights are clipped to [-1, 1] afterwards. Biases are not clipped.
void sgd_inner_step(BinaryNetwork& net, const Gradients& grads, InnerVelocity& velocity,
                    const InnerOptConfig& cfg, int epoch);

struct Checkpoint {
  BinaryNetwork net;
  NoiseVector p;
  std::uint64_t seed = 0;
  int epoch = 0;
};

// JSON container, see README for the layout. Version 1.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lanmax
