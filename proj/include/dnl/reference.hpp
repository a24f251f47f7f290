#pragma once

// Serial nested-loop implementations used as test oracles and as the
// baseline in the kernel benchmarks. They share no code with kernels.cpp.

#include <cstddef>

#include "dnl/tensor.hpp"

namespace dnl::reference {

/// input [N, C, H, W], weights [O, C, k, k], bias [O] -> [N, O, H', W'].
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t stride, std::size_t pad);

/// Depthwise "same" convolution; weights [C, 1, k, k].
Tensor depthwise_conv2d(const Tensor& input, const Tensor& weights);

Tensor avgpool2d(const Tensor& input, std::size_t kernel, std::size_t stride);

/// a [M, K] * b [K, P] -> [M, P].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Row-wise softmax of a rank-2 tensor. No max subtraction, so only for
/// well-scaled inputs.
Tensor softmax_rows(const Tensor& logits);

}  // namespace dnl::reference
