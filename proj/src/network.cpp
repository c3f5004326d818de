#include "deepfilter/network.hpp"

#include <algorithm>
#include <cmath>

#include "deepfilter/errors.hpp"
#include "deepfilter/random.hpp"
#include "layers.hpp"

namespace deepfilter::nn {

namespace {

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const Enum (&all)[N], const char* what) {
  for (Enum e : all) {
    if (to_string(e) == name) return e;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

bool finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), values_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw UsageError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(values_.size()) + " values");
  }
}

bool Tensor::all_finite() const { return finite(values_); }

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::DNN: return "dnn";
    case Architecture::CNN: return "cnn";
    case Architecture::RNN: return "rnn";
  }
  return "unknown";
}

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::MaxPool1D: return "maxpool1d";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::LSTM: return "lstm";
  }
  return "unknown";
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "unknown";
}

std::string_view to_string(Padding p) { return p == Padding::Same ? "same" : "valid"; }

Architecture parse_architecture(std::string_view name) {
  constexpr Architecture all[] = {Architecture::DNN, Architecture::CNN, Architecture::RNN};
  return parse_enum(name, all, "architecture");
}

LayerKind parse_layer_kind(std::string_view name) {
  constexpr LayerKind all[] = {LayerKind::Dense, LayerKind::Conv1D, LayerKind::MaxPool1D,
                               LayerKind::Flatten, LayerKind::LSTM};
  return parse_enum(name, all, "layer kind");
}

Activation parse_activation(std::string_view name) {
  constexpr Activation all[] = {Activation::Identity, Activation::Sigmoid, Activation::Relu,
                                Activation::Tanh};
  return parse_enum(name, all, "activation");
}

Padding parse_padding(std::string_view name) {
  constexpr Padding all[] = {Padding::Valid, Padding::Same};
  return parse_enum(name, all, "padding");
}

NetworkConfig NetworkConfig::preset(Architecture arch, std::size_t n0, std::size_t m2, std::size_t m1) {
  NetworkConfig c;
  c.architecture = arch;
  c.input_window = n0;
  c.input_channels = m2;
  c.output_dim = m1;
  auto dense = [](std::size_t units, Activation act) {
    return LayerSpec{LayerKind::Dense, units, 0, Padding::Valid, act};
  };
  switch (arch) {
    case Architecture::DNN:
      c.layers.push_back({LayerKind::Flatten});
      for (int i = 0; i < 5; ++i) c.layers.push_back(dense(5, Activation::Sigmoid));
      break;
    case Architecture::CNN:
      c.layers.push_back({LayerKind::Conv1D, 8, 5, Padding::Same, Activation::Relu});
      c.layers.push_back({LayerKind::MaxPool1D});
      c.layers.push_back({LayerKind::Conv1D, 16, 3, Padding::Valid, Activation::Relu});
      c.layers.push_back({LayerKind::MaxPool1D});
      c.layers.push_back({LayerKind::Flatten});
      c.layers.push_back(dense(16, Activation::Sigmoid));
      break;
    case Architecture::RNN:
      c.layers.push_back({LayerKind::LSTM, 16});
      break;
  }
  c.layers.push_back(dense(m1, Activation::Identity));
  c.validate();
  return c;
}

std::vector<Shape> NetworkConfig::activation_shapes() const {
  if (input_window == 0 || input_channels == 0 || output_dim == 0) {
    throw ConfigError("network dimensions must be positive");
  }
  std::vector<Shape> shapes{{input_window, input_channels}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const Shape& in = shapes.back();
    auto fail = [&](const std::string& why) {
      throw ConfigError("layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ") " + why +
                        "; input shape " + shape_string(in));
    };
    switch (l.kind) {
      case LayerKind::Dense:
        if (in.size() != 1) fail("needs a rank-1 input");
        if (l.units == 0) fail("needs units > 0");
        shapes.push_back({l.units});
        break;
      case LayerKind::Conv1D: {
        if (in.size() != 2) fail("needs a (length, channels) input");
        if (l.units == 0 || l.kernel == 0) fail("needs filters > 0 and kernel > 0");
        const auto d = kernels::conv_dims(in[0], in[1], l);
        if (d.out_length == 0) fail("kernel longer than the sequence");
        shapes.push_back({d.out_length, l.units});
        break;
      }
      case LayerKind::MaxPool1D:
        if (in.size() != 2) fail("needs a (length, channels) input");
        if (in[0] < 2) fail("needs length >= 2");
        shapes.push_back({in[0] / 2, in[1]});
        break;
      case LayerKind::Flatten:
        shapes.push_back({shape_size(in)});
        break;
      case LayerKind::LSTM:
        if (in.size() != 2) fail("needs a (steps, features) input");
        if (l.units == 0) fail("needs units > 0");
        shapes.push_back({l.units});
        break;
    }
  }
  if (shapes.back() != Shape{output_dim}) {
    throw ConfigError("network output shape " + shape_string(shapes.back()) + " does not match output_dim " +
                      std::to_string(output_dim));
  }
  return shapes;
}

std::vector<ParameterBlock> NetworkConfig::parameter_blocks() const {
  const auto shapes = activation_shapes();
  std::vector<ParameterBlock> blocks;
  std::size_t offset = 0;
  auto add = [&](std::size_t layer, const char* what, Shape shape) {
    ParameterBlock b;
    b.name = "layer" + std::to_string(layer) + "." + what;
    b.size = shape_size(shape);
    b.shape = std::move(shape);
    b.offset = offset;
    offset += b.size;
    blocks.push_back(std::move(b));
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const Shape& in = shapes[i];
    switch (l.kind) {
      case LayerKind::Dense:
        add(i, "kernel", {l.units, in[0]});
        add(i, "bias", {l.units});
        break;
      case LayerKind::Conv1D:
        add(i, "kernel", {l.units, l.kernel, in[1]});
        add(i, "bias", {l.units});
        break;
      case LayerKind::LSTM:
        add(i, "input_kernel", {4 * l.units, in[1]});
        add(i, "recurrent_kernel", {4 * l.units, l.units});
        add(i, "bias", {4 * l.units});
        break;
      case LayerKind::MaxPool1D:
      case LayerKind::Flatten:
        break;
    }
  }
  return blocks;
}

std::size_t NetworkConfig::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : parameter_blocks()) n += b.size;
  return n;
}

NetworkWeights NetworkWeights::zeros(const NetworkConfig& config) {
  NetworkWeights w;
  w.blocks = config.parameter_blocks();
  w.values.assign(w.blocks.empty() ? 0 : w.blocks.back().offset + w.blocks.back().size, 0.0);
  return w;
}

std::size_t NetworkWeights::find_block(std::string_view name) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].name == name) return i;
  }
  throw UsageError("no parameter block named '" + std::string(name) + "'");
}

bool NetworkWeights::all_finite() const { return finite(values); }

GradientBuffer GradientBuffer::zeros_like(const NetworkWeights& weights) {
  GradientBuffer g;
  g.blocks = weights.blocks;
  g.values.assign(weights.values.size(), 0.0);
  return g;
}

void GradientBuffer::clear() {
  std::fill(values.begin(), values.end(), 0.0);
  count = 0;
}

bool GradientBuffer::all_finite() const { return finite(values); }

namespace {

/// Parameter block index of the first block of each layer (SIZE_MAX if none).
std::vector<std::size_t> first_block_per_layer(const NetworkConfig& config) {
  std::vector<std::size_t> first(config.layers.size(), SIZE_MAX);
  std::size_t next = 0;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    switch (config.layers[i].kind) {
      case LayerKind::Dense:
      case LayerKind::Conv1D:
        first[i] = next;
        next += 2;
        break;
      case LayerKind::LSTM:
        first[i] = next;
        next += 3;
        break;
      default:
        break;
    }
  }
  return first;
}

struct CompiledLayout {
  NetworkConfig config;
  bool valid = false;
  std::vector<Shape> shapes;
  std::vector<std::size_t> first_block;
  std::size_t parameter_count = 0;
};

thread_local CompiledLayout tls_layout;

const CompiledLayout& layout_for(const NetworkConfig& config) {
  if (!tls_layout.valid || !(tls_layout.config == config)) {
    tls_layout.valid = false;
    tls_layout.shapes = config.activation_shapes();
    tls_layout.first_block = first_block_per_layer(config);
    tls_layout.parameter_count = config.parameter_count();
    tls_layout.config = config;
    tls_layout.valid = true;
  }
  return tls_layout;
}

}  // namespace

std::span<const double> forward(const NetworkWeights& weights, const NetworkConfig& config,
                                std::span<const double> input, Tape& tape) {
  const CompiledLayout& layout = layout_for(config);
  const auto& shapes = layout.shapes;
  if (input.size() != config.input_window * config.input_channels) {
    throw ConfigError("input has " + std::to_string(input.size()) + " values, expected " +
                      shape_string(shapes.front()));
  }
  if (weights.values.size() != layout.parameter_count) {
    throw ConfigError("weights hold " + std::to_string(weights.values.size()) + " parameters, config needs " +
                      std::to_string(layout.parameter_count));
  }
  tape.input.assign(input.begin(), input.end());
  tape.layers.resize(config.layers.size());
  tape.weights_data = weights.values.data();
  tape.parameter_count = weights.values.size();

  std::span<const double> current = tape.input;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    LayerCache& cache = tape.layers[i];
    const Shape& in = shapes[i];
    const std::size_t out_size = shape_size(shapes[i + 1]);
    const std::size_t b = layout.first_block[i];
    switch (l.kind) {
      case LayerKind::Dense:
        cache.output.resize(out_size);
        kernels::dense_forward({in[0], l.units}, weights.block(b), weights.block(b + 1), l.activation, current,
                               cache.output);
        break;
      case LayerKind::Conv1D:
        cache.output.resize(out_size);
        kernels::conv_forward(kernels::conv_dims(in[0], in[1], l), weights.block(b), weights.block(b + 1),
                              l.activation, current, cache.output);
        break;
      case LayerKind::MaxPool1D:
        cache.output.resize(out_size);
        cache.argmax.resize(out_size);
        kernels::maxpool_forward(in[0], in[1], current, cache.output, cache.argmax);
        break;
      case LayerKind::Flatten:
        cache.output.assign(current.begin(), current.end());
        break;
      case LayerKind::LSTM:
        kernels::lstm_forward({in[0], in[1], l.units}, weights.block(b), weights.block(b + 1),
                              weights.block(b + 2), current, cache);
        break;
    }
    if (!finite(cache.output)) {
      throw NumericalError("non-finite activation in layer " + std::to_string(i) + " (" +
                           std::string(to_string(l.kind)) + ")");
    }
    current = cache.output;
  }
  return current;
}

ForwardResult forward(const NetworkWeights& weights, const NetworkConfig& config, const Tensor& input) {
  if (input.shape() != Shape{config.input_window, config.input_channels} &&
      input.shape() != Shape{config.input_window * config.input_channels}) {
    throw ConfigError("input shape " + shape_string(input.shape()) + " does not match (" +
                      std::to_string(config.input_window) + ", " + std::to_string(config.input_channels) + ")");
  }
  ForwardResult result;
  const auto out = forward(weights, config, input.values(), result.tape);
  result.output = Tensor({out.size()}, std::vector<double>(out.begin(), out.end()));
  return result;
}

void backward_accumulate(const NetworkWeights& weights, const NetworkConfig& config, const Tape& tape,
                         std::span<const double> output_grad, GradientBuffer& grads) {
  if (tape.weights_data != weights.values.data() || tape.parameter_count != weights.values.size() ||
      tape.layers.size() != config.layers.size()) {
    throw UsageError("tape does not belong to these weights/config (stale or mismatched)");
  }
  if (grads.values.size() != weights.values.size()) throw UsageError("gradient buffer does not match weights");
  if (output_grad.size() != config.output_dim) throw UsageError("output gradient has the wrong size");

  const CompiledLayout& layout = layout_for(config);
  const auto& shapes = layout.shapes;
  if (weights.values.size() != layout.parameter_count) throw UsageError("weights do not match the network config");
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (tape.layers[i].output.size() != shape_size(shapes[i + 1])) {
      throw UsageError("tape was recorded for a different network config");
    }
  }
  thread_local Buffer delta;
  thread_local Buffer in_grad;
  delta.assign(output_grad.begin(), output_grad.end());

  auto grad_block = [&](std::size_t b) {
    return std::span<double>(grads.values.data() + grads.blocks[b].offset, grads.blocks[b].size);
  };

  for (std::size_t i = config.layers.size(); i-- > 0;) {
    const LayerSpec& l = config.layers[i];
    const LayerCache& cache = tape.layers[i];
    const std::span<const double> input = i == 0 ? std::span<const double>(tape.input)
                                                 : std::span<const double>(tape.layers[i - 1].output);
    const Shape& in = shapes[i];
    const bool need_input_grad = i > 0;
    in_grad.resize(need_input_grad ? shape_size(in) : 0);
    const std::size_t b = layout.first_block[i];
    switch (l.kind) {
      case LayerKind::Dense:
        kernels::dense_backward({in[0], l.units}, weights.block(b), l.activation, input, cache.output, delta,
                                grad_block(b), grad_block(b + 1), in_grad);
        break;
      case LayerKind::Conv1D:
        kernels::conv_backward(kernels::conv_dims(in[0], in[1], l), weights.block(b), l.activation, input,
                               cache.output, delta, grad_block(b), grad_block(b + 1), in_grad);
        break;
      case LayerKind::MaxPool1D:
        if (need_input_grad) kernels::maxpool_backward(in[1], cache.argmax, delta, in_grad);
        break;
      case LayerKind::Flatten:
        if (need_input_grad) in_grad.assign(delta.begin(), delta.end());
        break;
      case LayerKind::LSTM:
        kernels::lstm_backward({in[0], in[1], l.units}, weights.block(b), weights.block(b + 1), input, cache,
                               delta, grad_block(b), grad_block(b + 1), grad_block(b + 2), in_grad);
        break;
    }
    if (!need_input_grad) break;
    delta.swap(in_grad);
  }
  ++grads.count;
}

GradientBuffer backward(const NetworkWeights& weights, const NetworkConfig& config, const Tape& tape,
                        const Tensor& output_grad) {
  GradientBuffer grads = GradientBuffer::zeros_like(weights);
  backward_accumulate(weights, config, tape, output_grad.values(), grads);
  return grads;
}

double mse_loss(std::span<const double> output, std::span<const double> target) {
  if (output.size() != target.size()) throw UsageError("loss operands differ in size");
  double sum = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double d = output[i] - target[i];
    sum += d * d;
  }
  return 0.5 * sum;
}

double mse_loss(const Tensor& output, const Tensor& target) {
  if (output.shape() != target.shape()) throw UsageError("loss operands differ in shape");
  return mse_loss(output.values(), target.values());
}

double mse_loss(std::span<const Tensor> outputs, std::span<const Tensor> targets) {
  if (outputs.size() != targets.size()) throw UsageError("batch sizes differ");
  if (outputs.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) sum += mse_loss(outputs[i], targets[i]);
  return sum / static_cast<double>(outputs.size());
}

void sgd_update_in_place(NetworkWeights& weights, const GradientBuffer& grads, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("learning rate must lie in (0, 1)");
  if (grads.values.size() != weights.values.size() || grads.blocks != weights.blocks) {
    throw UsageError("gradient buffer does not match weights");
  }
  for (std::size_t i = 0; i < weights.values.size(); ++i) weights.values[i] -= gamma * grads.values[i];
}

NetworkWeights sgd_update(const NetworkWeights& weights, const GradientBuffer& grads, double gamma) {
  NetworkWeights next = weights;
  sgd_update_in_place(next, grads, gamma);
  return next;
}

NetworkWeights init_weights(const NetworkConfig& config, std::uint64_t seed) {
  const auto shapes = config.activation_shapes();
  NetworkWeights w = NetworkWeights::zeros(config);
  GaussianSource source(make_engine(seed, Stream::kInitialization));
  auto glorot = [&](std::span<double> block, double fan_in, double fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : block) v = bound * (2.0 * source.unit() - 1.0);
  };
  const auto first = first_block_per_layer(config);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    const Shape& in = shapes[i];
    const std::size_t b = first[i];
    switch (l.kind) {
      case LayerKind::Dense:
        glorot(w.block(b), static_cast<double>(in[0]), static_cast<double>(l.units));
        break;
      case LayerKind::Conv1D:
        glorot(w.block(b), static_cast<double>(l.kernel * in[1]), static_cast<double>(l.kernel * l.units));
        break;
      case LayerKind::LSTM: {
        glorot(w.block(b), static_cast<double>(in[1]), static_cast<double>(4 * l.units));
        glorot(w.block(b + 1), static_cast<double>(l.units), static_cast<double>(4 * l.units));
        auto bias = w.block(b + 2);
        std::fill(bias.begin() + static_cast<std::ptrdiff_t>(l.units),
                  bias.begin() + static_cast<std::ptrdiff_t>(2 * l.units), 1.0);
        break;
      }
      default:
        break;
    }
  }
  return w;
}

StopDecision early_stopping_monitor(std::span<const double> history, std::size_t patience) {
  if (patience < 1) throw UsageError("patience must be at least 1");
  StopDecision decision;
  if (history.empty()) return decision;
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] < history[best] || (!std::isfinite(history[best]) && std::isfinite(history[i]))) best = i;
  }
  decision.best_epoch = best;
  const std::size_t stale = history.size() - 1 - best;
  decision.action = stale >= patience ? StopAction::Stop : StopAction::Continue;
  return decision;
}

}  // namespace deepfilter::nn
