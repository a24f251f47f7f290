#include "dnl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dnl::kernels {
namespace {

// Below this many multiply-adds a kernel stays on the calling thread.
constexpr std::size_t kParallelWork = 1 << 15;

// Unfolds each sample's receptive fields. Row r = (c, ky, kx) of sample n
// holds the input under tap r for every output position; padding reads 0.
// With `transposed` the layout is [n][position][r] instead of [n][r][position].
std::vector<double> unfold(const ConvGeometry& g, std::span<const double> input,
                           bool transposed) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t positions = oh * ow, rows = g.in_channels * g.kernel * g.kernel;
  std::vector<double> col(g.batch * rows * positions, 0.0);
  const bool parallel = col.size() > kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t n = 0; n < g.batch; ++n) {
    double* dst = col.data() + n * rows * positions;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const double* in = input.data() + (n * g.in_channels + c) * g.height * g.width;
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const std::size_t r = (c * g.kernel + ky) * g.kernel + kx;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
              const std::size_t q = oy * ow + ox;
              dst[transposed ? q * rows + r : r * positions + q] = in[iy * g.width + ix];
            }
          }
        }
      }
    }
  }
  return col;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weights,
                    std::span<const double> bias, std::span<double> output) {
  const std::size_t positions = g.out_height() * g.out_width();
  const std::size_t rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t planes = g.batch * g.out_channels;
  const std::vector<double> col = unfold(g, input, false);
  const bool parallel = planes * positions * rows > kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t n = p / g.out_channels, o = p % g.out_channels;
    double* out = output.data() + p * positions;
    std::fill(out, out + positions, bias.empty() ? 0.0 : bias[o]);
    const double* w = weights.data() + o * rows;
    const double* src = col.data() + n * rows * positions;
    for (std::size_t r = 0; r < rows; ++r) {
      const double wv = w[r];
      const double* x = src + r * positions;
      for (std::size_t q = 0; q < positions; ++q) out[q] += wv * x[q];
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g,
                           std::span<const double> grad_output,
                           std::span<const double> weights,
                           std::span<double> grad_input) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t positions = oh * ow, rows = g.in_channels * g.kernel * g.kernel;
  const bool parallel = g.batch * positions * rows * g.out_channels > kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t n = 0; n < g.batch; ++n) {
    // Gradient of the unfolded input, one row of taps per output position.
    std::vector<double> dcol(positions * rows, 0.0);
    const double* dout = grad_output.data() + n * g.out_channels * positions;
    for (std::size_t q = 0; q < positions; ++q) {
      double* d = dcol.data() + q * rows;
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const double gv = dout[o * positions + q];
        const double* w = weights.data() + o * rows;
        for (std::size_t r = 0; r < rows; ++r) d[r] += gv * w[r];
      }
    }
    double* din = grad_input.data() + n * g.in_channels * g.height * g.width;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double* d = dcol.data() + (oy * ow + ox) * rows;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          double* plane = din + c * g.height * g.width;
          for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
              plane[iy * g.width + ix] += d[(c * g.kernel + ky) * g.kernel + kx];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const ConvGeometry& g,
                            std::span<const double> input,
                            std::span<const double> grad_output,
                            std::span<double> grad_weights,
                            std::span<double> grad_bias) {
  const std::size_t positions = g.out_height() * g.out_width();
  const std::size_t rows = g.in_channels * g.kernel * g.kernel;
  const std::vector<double> col = unfold(g, input, true);
  const bool parallel = g.batch * g.out_channels * positions * rows > kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    std::vector<double> acc(rows, 0.0);
    double bias_acc = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const double* dout = grad_output.data() + (n * g.out_channels + o) * positions;
      const double* src = col.data() + n * positions * rows;
      for (std::size_t q = 0; q < positions; ++q) {
        const double gv = dout[q];
        bias_acc += gv;
        const double* x = src + q * rows;
        for (std::size_t r = 0; r < rows; ++r) acc[r] += gv * x[r];
      }
    }
    double* dw = grad_weights.data() + o * rows;
    for (std::size_t r = 0; r < rows; ++r) dw[r] += acc[r];
    if (!grad_bias.empty()) grad_bias[o] += bias_acc;
  }
}

namespace {

// Visits every in-bounds (output, input) pixel pair of one depthwise tap.
template <typename Fn>
void for_each_tap(std::size_t height, std::size_t width, std::size_t pad,
                  std::size_t ky, std::size_t kx, Fn&& fn) {
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  const auto dy = static_cast<std::ptrdiff_t>(ky) - static_cast<std::ptrdiff_t>(pad);
  const auto dx = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(pad);
  const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
  const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(h, h - dy);
  const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
  const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w, w - dx);
  for (std::ptrdiff_t y = y0; y < y1; ++y) {
    for (std::ptrdiff_t x = x0; x < x1; ++x) {
      fn(static_cast<std::size_t>(y * w + x),
         static_cast<std::size_t>((y + dy) * w + (x + dx)));
    }
  }
}

}  // namespace

void depthwise_forward(const DepthwiseGeometry& g,
                       std::span<const double> input,
                       std::span<const double> weights,
                       std::span<double> output) {
  const std::size_t plane = g.height * g.width;
  const std::size_t ksq = g.kernel * g.kernel, pad = g.kernel / 2;
  const std::size_t planes = g.batch * g.channel_count;
  const bool parallel = planes * plane * ksq > kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t n = p / g.channel_count, j = p % g.channel_count;
    const std::size_t c = g.channel_begin + j;
    const double* in = input.data() + (n * g.channels + c) * plane;
    double* out = output.data() + (n * g.channels + c) * plane;
    const double* w = weights.data() + j * ksq;
    std::fill(out, out + plane, 0.0);
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double wv = w[ky * g.kernel + kx];
        for_each_tap(g.height, g.width, pad, ky, kx,
                     [&](std::size_t o, std::size_t i) { out[o] += wv * in[i]; });
      }
    }
  }
}

void depthwise_backward_input(const DepthwiseGeometry& g,
                              std::span<const double> grad_output,
                              std::span<const double> weights,
                              std::span<double> grad_input) {
  const std::size_t plane = g.height * g.width;
  const std::size_t ksq = g.kernel * g.kernel, pad = g.kernel / 2;
  const std::size_t planes = g.batch * g.channel_count;
  const bool parallel = planes * plane * ksq > kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t n = p / g.channel_count, j = p % g.channel_count;
    const std::size_t c = g.channel_begin + j;
    const double* dout = grad_output.data() + (n * g.channels + c) * plane;
    double* din = grad_input.data() + (n * g.channels + c) * plane;
    const double* w = weights.data() + j * ksq;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double wv = w[ky * g.kernel + kx];
        for_each_tap(g.height, g.width, pad, ky, kx,
                     [&](std::size_t o, std::size_t i) { din[i] += wv * dout[o]; });
      }
    }
  }
}

void depthwise_backward_weights(const DepthwiseGeometry& g,
                                std::span<const double> input,
                                std::span<const double> grad_output,
                                std::span<double> grad_weights) {
  const std::size_t plane = g.height * g.width;
  const std::size_t ksq = g.kernel * g.kernel, pad = g.kernel / 2;
  const bool parallel = g.batch * g.channel_count * plane * ksq > kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t j = 0; j < g.channel_count; ++j) {
    const std::size_t c = g.channel_begin + j;
    double* dw = grad_weights.data() + j * ksq;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        double acc = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const double* in = input.data() + (n * g.channels + c) * plane;
          const double* dout = grad_output.data() + (n * g.channels + c) * plane;
          for_each_tap(g.height, g.width, pad, ky, kx,
                       [&](std::size_t o, std::size_t i) { acc += dout[o] * in[i]; });
        }
        dw[ky * g.kernel + kx] += acc;
      }
    }
  }
}

void batched_gemm(const GemmGeometry& g, std::span<const double> a,
                  std::span<const double> b, std::span<double> c,
                  bool accumulate) {
  const std::size_t a_size = g.rows * g.inner, b_size = g.inner * g.cols;
  const std::size_t c_size = g.rows * g.cols;
  const std::size_t total_rows = g.batch * g.rows;
  const bool parallel = total_rows * g.inner * g.cols > kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t r = 0; r < total_rows; ++r) {
    const std::size_t bi = r / g.rows, i = r % g.rows;
    const double* A = a.data() + bi * a_size;
    const double* B = b.data() + bi * b_size;
    double* C = c.data() + bi * c_size + i * g.cols;
    if (g.trans_b) {
      // Dot-product form: both operands are contiguous along `inner`.
      for (std::size_t j = 0; j < g.cols; ++j) {
        const double* brow = B + j * g.inner;
        double acc = 0.0;
        for (std::size_t k = 0; k < g.inner; ++k) {
          const double av = g.trans_a ? A[k * g.rows + i] : A[i * g.inner + k];
          acc += av * brow[k];
        }
        C[j] = accumulate ? C[j] + acc : acc;
      }
    } else {
      // Row-update form; each C[i, j] still sums over k in ascending order.
      if (!accumulate) std::fill(C, C + g.cols, 0.0);
      double* acc = C;
      for (std::size_t k = 0; k < g.inner; ++k) {
        const double av = g.trans_a ? A[k * g.rows + i] : A[i * g.inner + k];
        const double* brow = B + k * g.cols;
        for (std::size_t j = 0; j < g.cols; ++j) acc[j] += av * brow[j];
      }
    }
  }
}

void softmax_rows(std::size_t rows, std::size_t cols,
                  std::span<const double> logits, std::span<double> probs) {
  const bool parallel = rows * cols > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = logits.data() + r * cols;
    double* y = probs.data() + r * cols;
    const double m = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - m);
      z += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
  }
}

void softmax_rows_backward(std::size_t rows, std::size_t cols,
                           std::span<const double> probs,
                           std::span<const double> grad_probs,
                           std::span<double> grad_logits) {
  const bool parallel = rows * cols > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t r = 0; r < rows; ++r) {
    const double* y = probs.data() + r * cols;
    const double* dy = grad_probs.data() + r * cols;
    double* dx = grad_logits.data() + r * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += y[j] * dy[j];
    for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
  }
}

void avgpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> output) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const double inv = 1.0 / static_cast<double>(g.kernel * g.kernel);
#pragma omp parallel for schedule(static) if (g.planes * oh * ow * g.kernel * g.kernel > kParallelWork)
  for (std::size_t p = 0; p < g.planes; ++p) {
    const double* in = input.data() + p * g.height * g.width;
    double* out = output.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            acc += in[(oy * g.stride + ky) * g.width + ox * g.stride + kx];
          }
        }
        out[oy * ow + ox] = acc * inv;
      }
    }
  }
}

void avgpool_backward(const PoolGeometry& g,
                      std::span<const double> grad_output,
                      std::span<double> grad_input) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const double inv = 1.0 / static_cast<double>(g.kernel * g.kernel);
#pragma omp parallel for schedule(static) if (g.planes * oh * ow * g.kernel * g.kernel > kParallelWork)
  for (std::size_t p = 0; p < g.planes; ++p) {
    double* din = grad_input.data() + p * g.height * g.width;
    const double* dout = grad_output.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double d = dout[oy * ow + ox] * inv;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            din[(oy * g.stride + ky) * g.width + ox * g.stride + kx] += d;
          }
        }
      }
    }
  }
}

void upsample_nearest_forward(const UpsampleGeometry& g,
                              std::span<const double> input,
                              std::span<double> output) {
  for (std::size_t p = 0; p < g.planes; ++p) {
    const double* in = input.data() + p * g.height * g.width;
    double* out = output.data() + p * g.out_height * g.out_width;
    for (std::size_t y = 0; y < g.out_height; ++y) {
      const std::size_t sy = std::min(y / g.factor, g.height - 1);
      for (std::size_t x = 0; x < g.out_width; ++x) {
        const std::size_t sx = std::min(x / g.factor, g.width - 1);
        out[y * g.out_width + x] = in[sy * g.width + sx];
      }
    }
  }
}

void upsample_nearest_backward(const UpsampleGeometry& g,
                               std::span<const double> grad_output,
                               std::span<double> grad_input) {
  for (std::size_t p = 0; p < g.planes; ++p) {
    double* din = grad_input.data() + p * g.height * g.width;
    const double* dout = grad_output.data() + p * g.out_height * g.out_width;
    for (std::size_t y = 0; y < g.out_height; ++y) {
      const std::size_t sy = std::min(y / g.factor, g.height - 1);
      for (std::size_t x = 0; x < g.out_width; ++x) {
        const std::size_t sx = std::min(x / g.factor, g.width - 1);
        din[sy * g.width + sx] += dout[y * g.out_width + x];
      }
    }
  }
}

}  // namespace dnl::kernels
