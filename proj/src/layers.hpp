#pragma once

// Per-layer forward/backward kernels on flat row-major buffers. Sequence
// activations are (length, channels); dense activations are vectors.

#include <cstddef>
#include <span>

#include "deepfilter/network.hpp"

namespace deepfilter::nn::kernels {

double activate(Activation act, double z);
/// Derivative expressed through the activation output a = act(z).
double activation_slope(Activation act, double a);

struct DenseDims {
  std::size_t in = 0;
  std::size_t out = 0;
};

void dense_forward(const DenseDims& d, std::span<const double> kernel, std::span<const double> bias,
                   Activation act, std::span<const double> in, std::span<double> out);

/// `delta` is dLoss/dOutput on entry and is overwritten with dLoss/dz.
void dense_backward(const DenseDims& d, std::span<const double> kernel, Activation act,
                    std::span<const double> in, std::span<const double> out, std::span<double> delta,
                    std::span<double> kernel_grad, std::span<double> bias_grad,
                    std::span<double> in_grad);

struct ConvDims {
  std::size_t length = 0;
  std::size_t in_channels = 0;
  std::size_t filters = 0;
  std::size_t kernel = 0;
  std::size_t pad_left = 0;
  std::size_t out_length = 0;
};

ConvDims conv_dims(std::size_t length, std::size_t in_channels, const LayerSpec& spec);

/// Kernel layout (filters, kernel, in_channels).
void conv_forward(const ConvDims& d, std::span<const double> kernel, std::span<const double> bias,
                  Activation act, std::span<const double> in, std::span<double> out);

void conv_backward(const ConvDims& d, std::span<const double> kernel, Activation act,
                   std::span<const double> in, std::span<const double> out, std::span<double> delta,
                   std::span<double> kernel_grad, std::span<double> bias_grad, std::span<double> in_grad);

/// Width 2, stride 2, trailing odd element dropped. Ties route to the first index.
void maxpool_forward(std::size_t length, std::size_t channels, std::span<const double> in,
                     std::span<double> out, std::span<std::uint32_t> argmax);

void maxpool_backward(std::size_t channels, std::span<const std::uint32_t> argmax,
                      std::span<const double> out_grad, std::span<double> in_grad);

struct LstmDims {
  std::size_t steps = 0;
  std::size_t inputs = 0;
  std::size_t hidden = 0;
};

/// Kernels: input (4H, m), recurrent (4H, H), bias (4H); gate order i, f, g, o.
/// Output is the final hidden state.
void lstm_forward(const LstmDims& d, std::span<const double> input_kernel,
                  std::span<const double> recurrent_kernel, std::span<const double> bias,
                  std::span<const double> in, LayerCache& cache);

void lstm_backward(const LstmDims& d, std::span<const double> input_kernel,
                   std::span<const double> recurrent_kernel, std::span<const double> in,
                   const LayerCache& cache, std::span<const double> out_grad,
                   std::span<double> input_kernel_grad, std::span<double> recurrent_kernel_grad,
                   std::span<double> bias_grad, std::span<double> in_grad);

}  // namespace deepfilter::nn::kernels
