#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "dnl/graph.hpp"

namespace dnl {

enum class Mode { train, eval };

/// Running statistics for one batch-normalisation layer.
///
/// Eval mode before any training step uses the initial values (mean 0,
/// variance 1).
struct BatchNormState {
  explicit BatchNormState(std::size_t channels = 1)
      : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}

  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double epsilon = 1e-5;
};

}  // namespace dnl

namespace dnl::ops {

// Elementwise; shapes must match exactly.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Sum of all elements -> shape [1].
Var sum(Var a);
/// max(x, 0); the derivative at exactly 0 is taken as 0.
Var relu(Var x);
Var reshape(Var x, Shape shape);

/// x [N, C, H, W], weights [O, C, k, k], bias [O] (or an invalid Var for
/// none). Output spatial size is floor((dim + 2 pad - k) / stride) + 1.
Var conv2d(Var x, Var weights, Var bias, std::size_t stride, std::size_t pad);

/// Channels split into four equal groups convolved depthwise with 1x1, 3x3,
/// 5x5 and 7x7 kernels ("same" padding). kernels[i] is [C/4, 1, k_i, k_i].
Var depthwise_multiscale_conv(Var x, const std::array<Var, 4>& kernels);

/// Per-channel normalisation over (N, H, W). Train mode uses batch statistics
/// (biased variance) and updates `state`; eval mode uses `state`.
Var batchnorm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode);

Var avgpool2d(Var x, std::size_t kernel, std::size_t stride);
Var upsample_nearest(Var x, std::size_t factor, std::size_t out_height,
                     std::size_t out_width);

/// [N, C, H, W] -> [N, C].
Var global_avg_pool(Var x);
/// x [N, I], weights [O, I], bias [O] -> [N, O].
Var linear(Var x, Var weights, Var bias);
/// Mean softmax cross-entropy; labels are class indices in [0, K).
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

/// [N, C, H, W] -> [N, H*W, C] (one row per pixel).
Var to_tokens(Var x);
/// [N, H*W, C] -> [N, C, H, W].
Var from_tokens(Var tokens, std::size_t height, std::size_t width);
/// Subtracts the mean over the M rows of each sample: [N, M, D].
Var center_tokens(Var tokens);
/// Batched product of rank-3 tensors with optional transposes of the
/// trailing two axes.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
/// Softmax over the last axis.
Var softmax(Var x);
/// a [N, M, C] + b [N, 1, C] broadcast over M.
Var add_broadcast_rows(Var a, Var b);

}  // namespace dnl::ops
