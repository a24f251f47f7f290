#include "dnl/reference.hpp"

#include <cmath>

#include "dnl/errors.hpp"

namespace dnl::reference {

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  expect_rank(input, 4, "reference::conv2d input");
  expect_rank(weights, 4, "reference::conv2d weights");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const std::size_t O = weights.dim(0), K = weights.dim(2);
  if (weights.dim(1) != C) throw ShapeError("reference::conv2d channel mismatch");
  const std::size_t OH = (H + 2 * pad - K) / stride + 1;
  const std::size_t OW = (W + 2 * pad - K) / stride + 1;
  Tensor out({N, O, OH, OW});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = bias[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                  continue;
                acc += weights.at({o, c, ky, kx}) *
                       input.at({n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)});
              }
          out.at({n, o, oy, ox}) = acc;
        }
  return out;
}

Tensor depthwise_conv2d(const Tensor& input, const Tensor& weights) {
  expect_rank(input, 4, "reference::depthwise_conv2d input");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const std::size_t K = weights.dim(2);
  const long pad = static_cast<long>(K / 2);
  if (weights.dim(0) != C) throw ShapeError("reference::depthwise_conv2d channel mismatch");
  Tensor out({N, C, H, W});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < K; ++ky)
            for (std::size_t kx = 0; kx < K; ++kx) {
              const long iy = static_cast<long>(y + ky) - pad;
              const long ix = static_cast<long>(x + kx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                continue;
              acc += weights.at({c, 0, ky, kx}) *
                     input.at({n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)});
            }
          out.at({n, c, y, x}) = acc;
        }
  return out;
}

Tensor avgpool2d(const Tensor& input, std::size_t kernel, std::size_t stride) {
  expect_rank(input, 4, "reference::avgpool2d input");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const std::size_t OH = (H - kernel) / stride + 1, OW = (W - kernel) / stride + 1;
  Tensor out({N, C, OH, OW});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < kernel; ++ky)
            for (std::size_t kx = 0; kx < kernel; ++kx)
              acc += input.at({n, c, oy * stride + ky, ox * stride + kx});
          out.at({n, c, oy, ox}) = acc * (1.0 / static_cast<double>(kernel * kernel));
        }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  expect_rank(a, 2, "reference::matmul a");
  expect_rank(b, 2, "reference::matmul b");
  if (a.dim(1) != b.dim(0)) throw ShapeError("reference::matmul inner mismatch");
  Tensor out({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) acc += a.at({i, k}) * b.at({k, j});
      out.at({i, j}) = acc;
    }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  expect_rank(logits, 2, "reference::softmax_rows");
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < logits.dim(0); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < logits.dim(1); ++j) z += std::exp(logits.at({i, j}));
    for (std::size_t j = 0; j < logits.dim(1); ++j)
      out.at({i, j}) = std::exp(logits.at({i, j})) / z;
  }
  return out;
}

}  // namespace dnl::reference
