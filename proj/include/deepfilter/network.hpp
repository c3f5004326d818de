#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "deepfilter/tensor.hpp"

namespace deepfilter::nn {

/// Parameter and activation storage. Eigen's vectorized kernels pick their
/// scalar/vector split from the data address, so every buffer they touch is
/// allocated at full SIMD alignment to keep results bit-reproducible.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

enum class Architecture { DNN, CNN, RNN };
enum class LayerKind { Dense, Conv1D, MaxPool1D, Flatten, LSTM };
enum class Activation { Identity, Sigmoid, Relu, Tanh };
enum class Padding { Valid, Same };

std::string_view to_string(Architecture a);
std::string_view to_string(LayerKind k);
std::string_view to_string(Activation a);
std::string_view to_string(Padding p);
Architecture parse_architecture(std::string_view name);
LayerKind parse_layer_kind(std::string_view name);
Activation parse_activation(std::string_view name);
Padding parse_padding(std::string_view name);

/// `units` is the width of a dense layer, the filter count of a convolution,
/// or the hidden size of an LSTM. Max-pooling always uses width 2, stride 2.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t units = 0;
  std::size_t kernel = 0;
  Padding padding = Padding::Valid;
  Activation activation = Activation::Identity;

  bool operator==(const LayerSpec&) const = default;
};

struct ParameterBlock {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const ParameterBlock&) const = default;
};

struct NetworkConfig {
  Architecture architecture = Architecture::DNN;
  std::size_t input_window = 50;
  std::size_t input_channels = 1;
  std::size_t output_dim = 1;
  std::vector<LayerSpec> layers;

  /// DNN: flatten, 5 x dense(5, sigmoid), dense(m1).
  /// CNN: conv(8, k5, same, relu), pool, conv(16, k3, valid, relu), pool,
  ///      flatten, dense(16, sigmoid), dense(m1).
  /// RNN: lstm(16), dense(m1).
  static NetworkConfig preset(Architecture arch, std::size_t n0, std::size_t m2, std::size_t m1);

  /// Activation shapes: entry 0 is the input (n0, m2), entry i+1 the output of layer i.
  /// Throws ConfigError if the layers do not chain from (n0, m2) to (m1).
  std::vector<Shape> activation_shapes() const;

  void validate() const { (void)activation_shapes(); }

  /// Trainable blocks in storage order.
  std::vector<ParameterBlock> parameter_blocks() const;
  std::size_t parameter_count() const;

  bool operator==(const NetworkConfig&) const = default;
};

/// Flat parameter store theta with a per-block view.
struct NetworkWeights {
  std::vector<ParameterBlock> blocks;
  Buffer values;

  static NetworkWeights zeros(const NetworkConfig& config);

  std::size_t parameter_count() const noexcept { return values.size(); }
  std::span<double> flat() noexcept { return values; }
  std::span<const double> flat() const noexcept { return values; }
  std::span<double> block(std::size_t i) { return {values.data() + blocks[i].offset, blocks[i].size}; }
  std::span<const double> block(std::size_t i) const {
    return {values.data() + blocks[i].offset, blocks[i].size};
  }
  /// Index of the block with the given name; throws UsageError if absent.
  std::size_t find_block(std::string_view name) const;
  bool all_finite() const;

  bool operator==(const NetworkWeights&) const = default;
};

/// Same layout as NetworkWeights; `count` is the number of accumulated samples.
struct GradientBuffer {
  std::vector<ParameterBlock> blocks;
  Buffer values;
  std::size_t count = 0;

  static GradientBuffer zeros_like(const NetworkWeights& weights);

  std::span<const double> block(std::size_t i) const {
    return {values.data() + blocks[i].offset, blocks[i].size};
  }
  void clear();
  bool all_finite() const;
};

/// Per-layer values cached by forward for use by backward.
struct LayerCache {
  Buffer output;
  std::vector<std::uint32_t> argmax;     // max-pool routing
  Buffer gates;             // LSTM: T x 4H, order i, f, g, o
  Buffer cells;             // LSTM: (T + 1) x H, row 0 = initial
  Buffer cell_tanh;         // LSTM: T x H
  Buffer hidden;            // LSTM: (T + 1) x H, row 0 = initial
  std::vector<std::uint8_t> clipped;     // LSTM: T x H, cell state hit the clip bound
};

struct Tape {
  Buffer input;
  std::vector<LayerCache> layers;
  const double* weights_data = nullptr;
  std::size_t parameter_count = 0;

  std::span<const double> output() const { return layers.back().output; }
};

struct ForwardResult {
  Tensor output;
  Tape tape;
};

/// Cell-state clip bound for LSTM layers.
inline constexpr double kCellClip = 50.0;

/// Throws ConfigError on shape mismatch and NumericalError (naming the layer)
/// when an activation becomes non-finite.
ForwardResult forward(const NetworkWeights& weights, const NetworkConfig& config, const Tensor& input);

/// Allocation-reusing variant; `input` holds n0 * m2 values, row-major (time, channel).
std::span<const double> forward(const NetworkWeights& weights, const NetworkConfig& config,
                                std::span<const double> input, Tape& tape);

/// Gradient of a scalar loss w.r.t. all parameters, given dLoss/dOutput.
GradientBuffer backward(const NetworkWeights& weights, const NetworkConfig& config, const Tape& tape,
                        const Tensor& output_grad);

/// Adds this sample's gradient into `grads` and increments grads.count.
void backward_accumulate(const NetworkWeights& weights, const NetworkConfig& config, const Tape& tape,
                         std::span<const double> output_grad, GradientBuffer& grads);

/// 1/2 |output - target|^2.
double mse_loss(const Tensor& output, const Tensor& target);
double mse_loss(std::span<const double> output, std::span<const double> target);
/// Mean of per-sample losses.
double mse_loss(std::span<const Tensor> outputs, std::span<const Tensor> targets);

/// theta - gamma * g, requiring 0 < gamma < 1.
NetworkWeights sgd_update(const NetworkWeights& weights, const GradientBuffer& grads, double gamma);
void sgd_update_in_place(NetworkWeights& weights, const GradientBuffer& grads, double gamma);

/// Glorot-uniform kernels, zero biases, LSTM forget-gate bias 1.
NetworkWeights init_weights(const NetworkConfig& config, std::uint64_t seed);

enum class StopAction { Continue, Stop };

struct StopDecision {
  StopAction action = StopAction::Continue;
  std::size_t best_epoch = 0;
};

/// Stops once the last `patience` epochs failed to strictly improve on the
/// running best. `best_epoch` always names the best epoch seen so far.
StopDecision early_stopping_monitor(std::span<const double> history, std::size_t patience);

}  // namespace deepfilter::nn
