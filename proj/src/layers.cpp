#include "layers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace deepfilter::nn::kernels {

namespace {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double activate(Activation act, double z) {
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
  }
  return z;
}

double activation_slope(Activation act, double a) {
  switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::Sigmoid: return a * (1.0 - a);
    case Activation::Relu: return a > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - a * a;
  }
  return 1.0;
}

void dense_forward(const DenseDims& d, std::span<const double> kernel, std::span<const double> bias,
                   Activation act, std::span<const double> in, std::span<double> out) {
  for (std::size_t o = 0; o < d.out; ++o) {
    const double* row = kernel.data() + o * d.in;
    double z = bias[o];
    for (std::size_t i = 0; i < d.in; ++i) z += row[i] * in[i];
    out[o] = activate(act, z);
  }
}

void dense_backward(const DenseDims& d, std::span<const double> kernel, Activation act,
                    std::span<const double> in, std::span<const double> out, std::span<double> delta,
                    std::span<double> kernel_grad, std::span<double> bias_grad,
                    std::span<double> in_grad) {
  for (std::size_t o = 0; o < d.out; ++o) delta[o] *= activation_slope(act, out[o]);
  if (!in_grad.empty()) std::fill(in_grad.begin(), in_grad.end(), 0.0);
  for (std::size_t o = 0; o < d.out; ++o) {
    const double g = delta[o];
    if (g == 0.0) continue;
    bias_grad[o] += g;
    double* grad_row = kernel_grad.data() + o * d.in;
    const double* row = kernel.data() + o * d.in;
    for (std::size_t i = 0; i < d.in; ++i) grad_row[i] += g * in[i];
    if (!in_grad.empty()) {
      for (std::size_t i = 0; i < d.in; ++i) in_grad[i] += g * row[i];
    }
  }
}

ConvDims conv_dims(std::size_t length, std::size_t in_channels, const LayerSpec& spec) {
  ConvDims d;
  d.length = length;
  d.in_channels = in_channels;
  d.filters = spec.units;
  d.kernel = spec.kernel;
  if (spec.padding == Padding::Same) {
    d.pad_left = (spec.kernel - 1) / 2;
    d.out_length = length;
  } else {
    d.pad_left = 0;
    d.out_length = length >= spec.kernel ? length - spec.kernel + 1 : 0;
  }
  return d;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;
using ConstColMap = Eigen::Map<const ColMat>;
using ColMap = Eigen::Map<ColMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
// Column t is the receptive field of output t: K * C contiguous values with stride C.
using WindowMap = Eigen::Map<const ColMat, 0, Eigen::OuterStride<>>;

// Same padding is handled by copying into a zero-padded scratch buffer.
std::span<const double> padded_input(const ConvDims& d, std::span<const double> in,
                                     Buffer& scratch) {
  if (d.pad_left == 0 && d.out_length + d.kernel - 1 <= d.length) return in;
  const std::size_t padded_length = d.out_length + d.kernel - 1;
  scratch.assign(padded_length * d.in_channels, 0.0);
  std::copy(in.begin(), in.end(), scratch.begin() + static_cast<std::ptrdiff_t>(d.pad_left * d.in_channels));
  return scratch;
}

}  // namespace

void conv_forward(const ConvDims& d, std::span<const double> kernel, std::span<const double> bias,
                  Activation act, std::span<const double> in, std::span<double> out) {
  thread_local Buffer scratch;
  const std::size_t row = d.kernel * d.in_channels;
  const auto src = padded_input(d, in, scratch);
  const auto F = static_cast<Eigen::Index>(d.filters);
  const auto T = static_cast<Eigen::Index>(d.out_length);
  WindowMap x(src.data(), static_cast<Eigen::Index>(row), T,
              Eigen::OuterStride<>(static_cast<Eigen::Index>(d.in_channels)));
  ConstRowMap w(kernel.data(), F, static_cast<Eigen::Index>(row));
  ColMap z(out.data(), F, T);
  z.noalias() = w * x;
  z.colwise() += ConstVecMap(bias.data(), F);
  for (double& v : out.first(d.out_length * d.filters)) v = activate(act, v);
}

void conv_backward(const ConvDims& d, std::span<const double> kernel, Activation act,
                   std::span<const double> in, std::span<const double> out, std::span<double> delta,
                   std::span<double> kernel_grad, std::span<double> bias_grad, std::span<double> in_grad) {
  thread_local Buffer scratch;
  thread_local Buffer field_grad;
  const std::size_t row = d.kernel * d.in_channels;
  for (std::size_t i = 0; i < d.out_length * d.filters; ++i) delta[i] *= activation_slope(act, out[i]);
  const auto src = padded_input(d, in, scratch);
  const auto F = static_cast<Eigen::Index>(d.filters);
  const auto T = static_cast<Eigen::Index>(d.out_length);
  const auto R = static_cast<Eigen::Index>(row);
  WindowMap x(src.data(), R, T, Eigen::OuterStride<>(static_cast<Eigen::Index>(d.in_channels)));
  ConstColMap g(delta.data(), F, T);
  RowMap(kernel_grad.data(), F, R).noalias() += g * x.transpose();
  VecMap(bias_grad.data(), F) += g.rowwise().sum();
  if (in_grad.empty()) return;

  field_grad.resize(row * d.out_length);
  ColMap fg(field_grad.data(), R, T);
  fg.noalias() = ConstRowMap(kernel.data(), F, R).transpose() * g;
  // Scatter the overlapping receptive fields back, dropping the padding.
  std::fill(in_grad.begin(), in_grad.end(), 0.0);
  for (std::size_t t = 0; t < d.out_length; ++t) {
    const double* col = field_grad.data() + t * row;
    for (std::size_t k = 0; k < d.kernel; ++k) {
      const std::size_t pos = t + k;
      if (pos < d.pad_left || pos - d.pad_left >= d.length) continue;
      double* dst = in_grad.data() + (pos - d.pad_left) * d.in_channels;
      const double* part = col + k * d.in_channels;
      for (std::size_t c = 0; c < d.in_channels; ++c) dst[c] += part[c];
    }
  }
}

void maxpool_forward(std::size_t length, std::size_t channels, std::span<const double> in,
                     std::span<double> out, std::span<std::uint32_t> argmax) {
  const std::size_t out_length = length / 2;
  for (std::size_t t = 0; t < out_length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t a = (2 * t) * channels + c;
      const std::size_t b = (2 * t + 1) * channels + c;
      const std::size_t pick = in[b] > in[a] ? b : a;
      out[t * channels + c] = in[pick];
      argmax[t * channels + c] = static_cast<std::uint32_t>(pick);
    }
  }
}

void maxpool_backward(std::size_t /*channels*/, std::span<const std::uint32_t> argmax,
                      std::span<const double> out_grad, std::span<double> in_grad) {
  std::fill(in_grad.begin(), in_grad.end(), 0.0);
  for (std::size_t i = 0; i < out_grad.size(); ++i) in_grad[argmax[i]] += out_grad[i];
}

void lstm_forward(const LstmDims& d, std::span<const double> input_kernel,
                  std::span<const double> recurrent_kernel, std::span<const double> bias,
                  std::span<const double> in, LayerCache& cache) {
  const std::size_t H = d.hidden;
  const std::size_t G = 4 * H;
  const auto Hi = static_cast<Eigen::Index>(H);
  const auto Gi = static_cast<Eigen::Index>(G);
  const auto Ti = static_cast<Eigen::Index>(d.steps);
  cache.gates.resize(d.steps * G);
  cache.cells.assign((d.steps + 1) * H, 0.0);
  cache.hidden.assign((d.steps + 1) * H, 0.0);
  cache.cell_tanh.resize(d.steps * H);
  cache.clipped.assign(d.steps * H, 0);
  cache.output.resize(H);

  // Input projections for every step at once; column t holds step t.
  ColMap z_all(cache.gates.data(), Gi, Ti);
  z_all.noalias() = ConstRowMap(input_kernel.data(), Gi, static_cast<Eigen::Index>(d.inputs)) *
                    ConstColMap(in.data(), static_cast<Eigen::Index>(d.inputs), Ti);
  z_all.colwise() += ConstVecMap(bias.data(), Gi);
  ConstRowMap wh(recurrent_kernel.data(), Gi, Hi);

  for (std::size_t t = 0; t < d.steps; ++t) {
    VecMap z(cache.gates.data() + t * G, Gi);
    z.noalias() += wh * ConstVecMap(cache.hidden.data() + t * H, Hi);
    // sigmoid(v) = 1 / (1 + exp(-v)), tanh(v) = 2 sigmoid(2v) - 1; both saturate cleanly
    // when exp overflows to infinity.
    auto a = z.array();
    a.segment(0, 2 * Hi) = 1.0 / (1.0 + (-a.segment(0, 2 * Hi)).exp());
    a.segment(2 * Hi, Hi) = 2.0 / (1.0 + (-2.0 * a.segment(2 * Hi, Hi)).exp()) - 1.0;
    a.segment(3 * Hi, Hi) = 1.0 / (1.0 + (-a.segment(3 * Hi, Hi)).exp());

    const double* gates = cache.gates.data() + t * G;
    const double* c_prev = cache.cells.data() + t * H;
    double* c = cache.cells.data() + (t + 1) * H;
    for (std::size_t j = 0; j < H; ++j) {
      double cell = gates[H + j] * c_prev[j] + gates[j] * gates[2 * H + j];
      if (cell > kCellClip || cell < -kCellClip) {
        cell = std::clamp(cell, -kCellClip, kCellClip);
        cache.clipped[t * H + j] = 1;
      }
      c[j] = cell;
    }
    VecMap tc(cache.cell_tanh.data() + t * H, Hi);
    tc.array() = 2.0 / (1.0 + (-2.0 * ConstVecMap(c, Hi).array()).exp()) - 1.0;
    VecMap(cache.hidden.data() + (t + 1) * H, Hi).array() =
        ConstVecMap(gates + 3 * H, Hi).array() * tc.array();
  }
  std::copy_n(cache.hidden.data() + d.steps * H, H, cache.output.data());
}

void lstm_backward(const LstmDims& d, std::span<const double> input_kernel,
                   std::span<const double> recurrent_kernel, std::span<const double> in,
                   const LayerCache& cache, std::span<const double> out_grad,
                   std::span<double> input_kernel_grad, std::span<double> recurrent_kernel_grad,
                   std::span<double> bias_grad, std::span<double> in_grad) {
  const std::size_t H = d.hidden;
  const std::size_t G = 4 * H;
  const auto Hi = static_cast<Eigen::Index>(H);
  const auto Gi = static_cast<Eigen::Index>(G);
  const auto Ti = static_cast<Eigen::Index>(d.steps);
  const auto Mi = static_cast<Eigen::Index>(d.inputs);
  thread_local Buffer dz_all;
  dz_all.assign(d.steps * G, 0.0);
  Eigen::VectorXd dh = ConstVecMap(out_grad.data(), Hi);
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(Hi);
  ConstRowMap wh(recurrent_kernel.data(), Gi, Hi);

  for (std::size_t step = d.steps; step-- > 0;) {
    const double* gates = cache.gates.data() + step * G;
    const double* c_prev = cache.cells.data() + step * H;
    const double* tc = cache.cell_tanh.data() + step * H;
    const std::uint8_t* clipped = cache.clipped.data() + step * H;
    double* dz = dz_all.data() + step * G;
    for (std::size_t j = 0; j < H; ++j) {
      const double ig = gates[j];
      const double fg = gates[H + j];
      const double cand = gates[2 * H + j];
      const double og = gates[3 * H + j];
      const double d_out_gate = dh[static_cast<Eigen::Index>(j)] * tc[j];
      double d_cell = dc[static_cast<Eigen::Index>(j)] +
                      dh[static_cast<Eigen::Index>(j)] * og * (1.0 - tc[j] * tc[j]);
      if (clipped[j]) d_cell = 0.0;
      dz[j] = d_cell * cand * ig * (1.0 - ig);
      dz[H + j] = d_cell * c_prev[j] * fg * (1.0 - fg);
      dz[2 * H + j] = d_cell * ig * (1.0 - cand * cand);
      dz[3 * H + j] = d_out_gate * og * (1.0 - og);
      dc[static_cast<Eigen::Index>(j)] = d_cell * fg;
    }
    dh.noalias() = wh.transpose() * ConstVecMap(dz, Gi);
  }

  ConstColMap dz(dz_all.data(), Gi, Ti);
  ConstColMap x(in.data(), Mi, Ti);
  ConstColMap h_prev(cache.hidden.data(), Hi, Ti);  // columns 0..T-1 are the previous states
  RowMap(input_kernel_grad.data(), Gi, Mi).noalias() += dz * x.transpose();
  RowMap(recurrent_kernel_grad.data(), Gi, Hi).noalias() += dz * h_prev.transpose();
  VecMap(bias_grad.data(), Gi) += dz.rowwise().sum();
  if (!in_grad.empty()) {
    ColMap(in_grad.data(), Mi, Ti).noalias() = ConstRowMap(input_kernel.data(), Gi, Mi).transpose() * dz;
  }
}

}  // namespace deepfilter::nn::kernels
