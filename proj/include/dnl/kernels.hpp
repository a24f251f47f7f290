#pragma once

// OpenMP kernels behind the graph operations.
//
// Every kernel fixes the summation order of each output element, so results
// are bit-identical regardless of thread count. Backward kernels accumulate
// (+=) into the gradient buffers they are handed. The serial oracles in
// reference.hpp are kept independent of these for testing and benchmarking.

#include <cstddef>
#include <span>

namespace dnl::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

/// Cross-correlation. `bias` may be empty.
void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weights,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g,
                           std::span<const double> grad_output,
                           std::span<const double> weights,
                           std::span<double> grad_input);
/// `grad_bias` may be empty.
void conv2d_backward_params(const ConvGeometry& g,
                            std::span<const double> input,
                            std::span<const double> grad_output,
                            std::span<double> grad_weights,
                            std::span<double> grad_bias);

/// Depthwise convolution over channels [channel_begin, channel_begin + count)
/// of a [batch, channels, height, width] map, "same" padding, stride 1.
/// Weights are [count, 1, kernel, kernel].
struct DepthwiseGeometry {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channel_begin = 0;
  std::size_t channel_count = 1;
  std::size_t kernel = 1;
};

void depthwise_forward(const DepthwiseGeometry& g,
                       std::span<const double> input,
                       std::span<const double> weights,
                       std::span<double> output);
void depthwise_backward_input(const DepthwiseGeometry& g,
                              std::span<const double> grad_output,
                              std::span<const double> weights,
                              std::span<double> grad_input);
void depthwise_backward_weights(const DepthwiseGeometry& g,
                                std::span<const double> input,
                                std::span<const double> grad_output,
                                std::span<double> grad_weights);

/// C[b] (+)= op(A[b]) * op(B[b]) for b in [0, batch); C[b] is rows x cols and
/// the contraction runs over `inner`. With trans_a, A[b] is stored
/// inner x rows; with trans_b, B[b] is stored cols x inner.
struct GemmGeometry {
  std::size_t batch = 1;
  std::size_t rows = 1;
  std::size_t inner = 1;
  std::size_t cols = 1;
  bool trans_a = false;
  bool trans_b = false;
};

void batched_gemm(const GemmGeometry& g, std::span<const double> a,
                  std::span<const double> b, std::span<double> c,
                  bool accumulate);

/// Row-wise softmax with max subtraction.
void softmax_rows(std::size_t rows, std::size_t cols,
                  std::span<const double> logits, std::span<double> probs);
void softmax_rows_backward(std::size_t rows, std::size_t cols,
                           std::span<const double> probs,
                           std::span<const double> grad_probs,
                           std::span<double> grad_logits);

struct PoolGeometry {
  std::size_t planes = 1;  // batch * channels
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kernel = 2;
  std::size_t stride = 2;

  std::size_t out_height() const { return (height - kernel) / stride + 1; }
  std::size_t out_width() const { return (width - kernel) / stride + 1; }
};

void avgpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> output);
void avgpool_backward(const PoolGeometry& g,
                      std::span<const double> grad_output,
                      std::span<double> grad_input);

/// Nearest-neighbour resize by an integer factor to an explicit target size:
/// target (y, x) reads source (min(y / factor, h - 1), min(x / factor, w - 1)).
struct UpsampleGeometry {
  std::size_t planes = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t factor = 2;
  std::size_t out_height = 2;
  std::size_t out_width = 2;
};

void upsample_nearest_forward(const UpsampleGeometry& g,
                              std::span<const double> input,
                              std::span<double> output);
void upsample_nearest_backward(const UpsampleGeometry& g,
                               std::span<const double> grad_output,
                               std::span<double> grad_input);

}  // namespace dnl::kernels
