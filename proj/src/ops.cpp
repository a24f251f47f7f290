#include "dnl/ops.hpp"

#include <cmath>
#include <string>

#include "dnl/errors.hpp"
#include "dnl/kernels.hpp"

namespace dnl::ops {
namespace {

void same_shape(Var a, Var b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

void need_rank(Var v, std::size_t rank, const char* what) {
  expect_rank(v.value(), rank, what);
}

}  // namespace

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& d) {
    for (Var v : {a, b}) {
      if (!g.requires_grad(v)) continue;
      Tensor& gv = g.grad(v);
      for (std::size_t i = 0; i < d.size(); ++i) gv[i] += d[i];
    }
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& d) {
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad(a);
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < d.size(); ++i) gb[i] += d[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.graph().record(std::move(out), {a}, [a, factor](Graph& g, const Tensor& d) {
    Tensor& ga = g.grad(a);
    for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * factor;
  });
}

Var sum(Var a) {
  return a.graph().record(Tensor::scalar(a.value().sum()), {a},
                          [a](Graph& g, const Tensor& d) {
                            Tensor& ga = g.grad(a);
                            for (double& v : ga.data()) v += d[0];
                          });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.graph().record(std::move(out), {x}, [x](Graph& g, const Tensor& d) {
    Tensor& gx = g.grad(x);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += d[i];
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.graph().record(std::move(out), {x}, [x](Graph& g, const Tensor& d) {
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] += d[i];
  });
}

Var conv2d(Var x, Var weights, Var bias, std::size_t stride, std::size_t pad) {
  need_rank(x, 4, "conv2d input");
  need_rank(weights, 4, "conv2d weights");
  const Shape& xs = x.shape();
  const Shape& ws = weights.shape();
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(xs[1]) +
                     " channels but weights " + shape_string(ws) + " expect " +
                     std::to_string(ws[1]));
  }
  if (ws[2] != ws[3] || ws[2] % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square and odd, got " + shape_string(ws));
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (xs[2] + 2 * pad < ws[2] || xs[3] + 2 * pad < ws[2]) {
    throw ShapeError("conv2d: padded input " + shape_string(xs) +
                     " smaller than kernel " + std::to_string(ws[2]));
  }
  if (bias.valid()) expect_shape(bias.value(), {ws[0]}, "conv2d bias");

  const kernels::ConvGeometry geo{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], stride, pad};
  Tensor out({xs[0], ws[0], geo.out_height(), geo.out_width()});
  kernels::conv2d_forward(geo, x.value().data(), weights.value().data(),
                          bias.valid() ? bias.value().data() : std::span<const double>{},
                          out.data());

  std::vector<Var> inputs{x, weights};
  if (bias.valid()) inputs.push_back(bias);
  return x.graph().record(
      std::move(out), inputs, [x, weights, bias, geo](Graph& g, const Tensor& d) {
        if (g.requires_grad(x)) {
          kernels::conv2d_backward_input(geo, d.data(), weights.value().data(),
                                         g.grad(x).data());
        }
        const bool want_w = g.requires_grad(weights);
        const bool want_b = bias.valid() && g.requires_grad(bias);
        if (want_w || want_b) {
          Tensor scratch_w;
          std::span<double> dw;
          if (want_w) {
            dw = g.grad(weights).data();
          } else {
            scratch_w = Tensor(weights.shape());
            dw = scratch_w.data();
          }
          kernels::conv2d_backward_params(
              geo, x.value().data(), d.data(), dw,
              want_b ? g.grad(bias).data() : std::span<double>{});
        }
      });
}

Var depthwise_multiscale_conv(Var x, const std::array<Var, 4>& kernels_) {
  need_rank(x, 4, "depthwise_multiscale_conv input");
  const Shape& xs = x.shape();
  const std::size_t channels = xs[1];
  if (channels % 4 != 0) {
    throw ConfigError("depthwise_multiscale_conv: channel count " +
                      std::to_string(channels) + " is not divisible by 4");
  }
  const std::size_t group = channels / 4;
  static constexpr std::array<std::size_t, 4> kSizes{1, 3, 5, 7};
  std::array<kernels::DepthwiseGeometry, 4> geos;
  for (std::size_t i = 0; i < 4; ++i) {
    expect_shape(kernels_[i].value(), {group, 1, kSizes[i], kSizes[i]},
                 "depthwise_multiscale_conv kernel");
    geos[i] = {xs[0], channels, xs[2], xs[3], i * group, group, kSizes[i]};
  }
  Tensor out(xs);
  for (std::size_t i = 0; i < 4; ++i) {
    kernels::depthwise_forward(geos[i], x.value().data(), kernels_[i].value().data(),
                               out.data());
  }
  std::vector<Var> inputs{x, kernels_[0], kernels_[1], kernels_[2], kernels_[3]};
  return x.graph().record(std::move(out), inputs,
                          [x, kernels_, geos](Graph& g, const Tensor& d) {
                            for (std::size_t i = 0; i < 4; ++i) {
                              if (g.requires_grad(x)) {
                                kernels::depthwise_backward_input(
                                    geos[i], d.data(), kernels_[i].value().data(),
                                    g.grad(x).data());
                              }
                              if (g.requires_grad(kernels_[i])) {
                                kernels::depthwise_backward_weights(
                                    geos[i], x.value().data(), d.data(),
                                    g.grad(kernels_[i]).data());
                              }
                            }
                          });
}

Var batchnorm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode) {
  need_rank(x, 4, "batchnorm input");
  const Shape& xs = x.shape();
  const std::size_t N = xs[0], C = xs[1], plane = xs[2] * xs[3];
  expect_shape(gamma.value(), {C}, "batchnorm gamma");
  expect_shape(beta.value(), {C}, "batchnorm beta");
  expect_shape(state.running_mean, {C}, "batchnorm running mean");
  const double count = static_cast<double>(N * plane);
  const Tensor& xv = x.value();

  Tensor mean({C}), inv_std({C});
  if (mode == Mode::train) {
    Tensor var({C});
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* p = xv.data().data() + (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mu = s / count;
      double ss = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* p = xv.data().data() + (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      mean[c] = mu;
      var[c] = ss / count;
      inv_std[c] = 1.0 / std::sqrt(var[c] + state.epsilon);
      state.running_mean[c] =
          state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mu;
      state.running_var[c] =
          state.momentum * state.running_var[c] + (1.0 - state.momentum) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.epsilon);
    }
  }

  Tensor xhat(xs), out(xs);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[base + i] = (xv[base + i] - mean[c]) * inv_std[c];
        out[base + i] = gamma.value()[c] * xhat[base + i] + beta.value()[c];
      }
    }
  }

  return x.graph().record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, mode, xhat = std::move(xhat), inv_std, N, C, plane,
       count](Graph& g, const Tensor& d) {
        Tensor dbeta({C}), dgamma({C});
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t n = 0; n < N; ++n) {
            const std::size_t base = (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              dbeta[c] += d[base + i];
              dgamma[c] += d[base + i] * xhat[base + i];
            }
          }
        }
        if (g.requires_grad(gamma)) {
          Tensor& gg = g.grad(gamma);
          for (std::size_t c = 0; c < C; ++c) gg[c] += dgamma[c];
        }
        if (g.requires_grad(beta)) {
          Tensor& gb = g.grad(beta);
          for (std::size_t c = 0; c < C; ++c) gb[c] += dbeta[c];
        }
        if (!g.requires_grad(x)) return;
        Tensor& gx = g.grad(x);
        for (std::size_t c = 0; c < C; ++c) {
          const double gm = gamma.value()[c];
          for (std::size_t n = 0; n < N; ++n) {
            const std::size_t base = (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              if (mode == Mode::train) {
                // d/dx of gamma * (x - mean) / std with batch mean and var.
                gx[base + i] += gm * inv_std[c] / count *
                                (count * d[base + i] - dbeta[c] -
                                 xhat[base + i] * dgamma[c]);
              } else {
                gx[base + i] += gm * inv_std[c] * d[base + i];
              }
            }
          }
        }
      });
}

Var avgpool2d(Var x, std::size_t kernel, std::size_t stride) {
  need_rank(x, 4, "avgpool2d input");
  const Shape& xs = x.shape();
  if (kernel == 0 || stride == 0 || xs[2] < kernel || xs[3] < kernel) {
    throw ShapeError("avgpool2d: window " + std::to_string(kernel) +
                     " does not fit input " + shape_string(xs));
  }
  const kernels::PoolGeometry geo{xs[0] * xs[1], xs[2], xs[3], kernel, stride};
  Tensor out({xs[0], xs[1], geo.out_height(), geo.out_width()});
  kernels::avgpool_forward(geo, x.value().data(), out.data());
  return x.graph().record(std::move(out), {x}, [x, geo](Graph& g, const Tensor& d) {
    kernels::avgpool_backward(geo, d.data(), g.grad(x).data());
  });
}

Var upsample_nearest(Var x, std::size_t factor, std::size_t out_height,
                     std::size_t out_width) {
  need_rank(x, 4, "upsample_nearest input");
  const Shape& xs = x.shape();
  if (factor == 0) throw ShapeError("upsample_nearest: factor must be positive");
  const kernels::UpsampleGeometry geo{xs[0] * xs[1], xs[2], xs[3],
                                      factor,        out_height, out_width};
  Tensor out({xs[0], xs[1], out_height, out_width});
  kernels::upsample_nearest_forward(geo, x.value().data(), out.data());
  return x.graph().record(std::move(out), {x}, [x, geo](Graph& g, const Tensor& d) {
    kernels::upsample_nearest_backward(geo, d.data(), g.grad(x).data());
  });
}

Var global_avg_pool(Var x) {
  need_rank(x, 4, "global_avg_pool input");
  const Shape& xs = x.shape();
  const std::size_t planes = xs[0] * xs[1], plane = xs[2] * xs[3];
  const double inv = 1.0 / static_cast<double>(plane);
  Tensor out({xs[0], xs[1]});
  for (std::size_t p = 0; p < planes; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += x.value()[p * plane + i];
    out[p] = s * inv;
  }
  return x.graph().record(std::move(out), {x},
                          [x, planes, plane, inv](Graph& g, const Tensor& d) {
                            Tensor& gx = g.grad(x);
                            for (std::size_t p = 0; p < planes; ++p) {
                              for (std::size_t i = 0; i < plane; ++i) {
                                gx[p * plane + i] += d[p] * inv;
                              }
                            }
                          });
}

Var linear(Var x, Var weights, Var bias) {
  need_rank(x, 2, "linear input");
  need_rank(weights, 2, "linear weights");
  const std::size_t N = x.shape()[0], I = x.shape()[1], O = weights.shape()[0];
  if (weights.shape()[1] != I) {
    throw ShapeError("linear: input width " + std::to_string(I) +
                     " vs weights " + shape_string(weights.shape()));
  }
  expect_shape(bias.value(), {O}, "linear bias");
  Tensor out({N, O});
  kernels::batched_gemm({1, N, I, O, false, true}, x.value().data(),
                        weights.value().data(), out.data(), false);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < O; ++o) out[n * O + o] += bias.value()[o];
  }
  return x.graph().record(
      std::move(out), {x, weights, bias},
      [x, weights, bias, N, I, O](Graph& g, const Tensor& d) {
        if (g.requires_grad(x)) {
          // dx [N, I] = d [N, O] * W [O, I]
          kernels::batched_gemm({1, N, O, I, false, false}, d.data(),
                                weights.value().data(), g.grad(x).data(), true);
        }
        if (g.requires_grad(weights)) {
          // dW [O, I] = d^T [O, N] * x [N, I]
          kernels::batched_gemm({1, O, N, I, true, false}, d.data(),
                                x.value().data(), g.grad(weights).data(), true);
        }
        if (g.requires_grad(bias)) {
          Tensor& gb = g.grad(bias);
          for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t o = 0; o < O; ++o) gb[o] += d[n * O + o];
          }
        }
      });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  need_rank(logits, 2, "softmax_cross_entropy logits");
  const std::size_t N = logits.shape()[0], K = logits.shape()[1];
  if (labels.size() != N) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(N) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(y) +
                       " outside [0, " + std::to_string(K) + ")");
    }
  }
  Tensor probs({N, K});
  kernels::softmax_rows(N, K, logits.value().data(), probs.data());
  double loss = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double* z = logits.value().data().data() + n * K;
    double m = z[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, z[k]);
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(z[k] - m);
    loss += m + std::log(s) - z[labels[n]];
  }
  loss /= static_cast<double>(N);
  std::vector<int> targets(labels.begin(), labels.end());
  return logits.graph().record(
      Tensor::scalar(loss), {logits},
      [logits, probs = std::move(probs), targets = std::move(targets), N, K](
          Graph& g, const Tensor& d) {
        Tensor& gl = g.grad(logits);
        const double s = d[0] / static_cast<double>(N);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t k = 0; k < K; ++k) {
            const double onehot = static_cast<int>(k) == targets[n] ? 1.0 : 0.0;
            gl[n * K + k] += s * (probs[n * K + k] - onehot);
          }
        }
      });
}

Var to_tokens(Var x) {
  need_rank(x, 4, "to_tokens input");
  const Shape& xs = x.shape();
  const std::size_t N = xs[0], C = xs[1], M = xs[2] * xs[3];
  Tensor out({N, M, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t m = 0; m < M; ++m)
        out[(n * M + m) * C + c] = x.value()[(n * C + c) * M + m];
  return x.graph().record(std::move(out), {x}, [x, N, C, M](Graph& g, const Tensor& d) {
    Tensor& gx = g.grad(x);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t m = 0; m < M; ++m)
          gx[(n * C + c) * M + m] += d[(n * M + m) * C + c];
  });
}

Var from_tokens(Var tokens, std::size_t height, std::size_t width) {
  need_rank(tokens, 3, "from_tokens input");
  const Shape& ts = tokens.shape();
  const std::size_t N = ts[0], M = ts[1], C = ts[2];
  if (M != height * width) {
    throw ShapeError("from_tokens: " + std::to_string(M) + " rows cannot form a " +
                     std::to_string(height) + "x" + std::to_string(width) + " map");
  }
  Tensor out({N, C, height, width});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t m = 0; m < M; ++m)
        out[(n * C + c) * M + m] = tokens.value()[(n * M + m) * C + c];
  return tokens.graph().record(std::move(out), {tokens},
                               [tokens, N, C, M](Graph& g, const Tensor& d) {
                                 Tensor& gt = g.grad(tokens);
                                 for (std::size_t n = 0; n < N; ++n)
                                   for (std::size_t c = 0; c < C; ++c)
                                     for (std::size_t m = 0; m < M; ++m)
                                       gt[(n * M + m) * C + c] += d[(n * C + c) * M + m];
                               });
}

Var center_tokens(Var tokens) {
  need_rank(tokens, 3, "center_tokens input");
  const Shape& ts = tokens.shape();
  const std::size_t N = ts[0], M = ts[1], D = ts[2];
  const double inv = 1.0 / static_cast<double>(M);
  Tensor out = tokens.value();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < D; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < M; ++m) s += out[(n * M + m) * D + j];
      const double mean = s * inv;
      for (std::size_t m = 0; m < M; ++m) out[(n * M + m) * D + j] -= mean;
    }
  }
  // The centering map is a symmetric projection, so its adjoint is itself.
  return tokens.graph().record(std::move(out), {tokens},
                               [tokens, N, M, D, inv](Graph& g, const Tensor& d) {
                                 Tensor& gt = g.grad(tokens);
                                 for (std::size_t n = 0; n < N; ++n) {
                                   for (std::size_t j = 0; j < D; ++j) {
                                     double s = 0.0;
                                     for (std::size_t m = 0; m < M; ++m)
                                       s += d[(n * M + m) * D + j];
                                     const double mean = s * inv;
                                     for (std::size_t m = 0; m < M; ++m)
                                       gt[(n * M + m) * D + j] += d[(n * M + m) * D + j] - mean;
                                   }
                                 }
                               });
}

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  need_rank(a, 3, "matmul a");
  need_rank(b, 3, "matmul b");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as[0] != bs[0]) throw ShapeError("matmul: batch sizes differ");
  const std::size_t rows = trans_a ? as[2] : as[1];
  const std::size_t inner = trans_a ? as[1] : as[2];
  const std::size_t inner_b = trans_b ? bs[2] : bs[1];
  const std::size_t cols = trans_b ? bs[1] : bs[2];
  if (inner != inner_b) {
    throw ShapeError("matmul: contraction mismatch " + shape_string(as) + " vs " +
                     shape_string(bs));
  }
  const std::size_t batch = as[0];
  Tensor out({batch, rows, cols});
  kernels::batched_gemm({batch, rows, inner, cols, trans_a, trans_b}, a.value().data(),
                        b.value().data(), out.data(), false);
  return a.graph().record(
      std::move(out), {a, b},
      [a, b, trans_a, trans_b, batch, rows, inner, cols](Graph& g, const Tensor& d) {
        // C = op(A) op(B); dC is rows x cols.
        if (g.requires_grad(a)) {
          if (!trans_a) {
            // dA [rows, inner] = dC * op(B)^T
            kernels::batched_gemm({batch, rows, cols, inner, false, !trans_b}, d.data(),
                                  b.value().data(), g.grad(a).data(), true);
          } else {
            // dA [inner, rows] = op(B) * dC^T
            kernels::batched_gemm({batch, inner, cols, rows, trans_b, true},
                                  b.value().data(), d.data(), g.grad(a).data(), true);
          }
        }
        if (g.requires_grad(b)) {
          if (!trans_b) {
            // dB [inner, cols] = op(A)^T * dC
            kernels::batched_gemm({batch, inner, rows, cols, !trans_a, false},
                                  a.value().data(), d.data(), g.grad(b).data(), true);
          } else {
            // dB [cols, inner] = dC^T * op(A)
            kernels::batched_gemm({batch, cols, rows, inner, true, trans_a}, d.data(),
                                  a.value().data(), g.grad(b).data(), true);
          }
        }
      });
}

Var softmax(Var x) {
  const Shape& xs = x.shape();
  const std::size_t cols = xs.back();
  const std::size_t rows = x.value().size() / cols;
  Tensor out(xs);
  kernels::softmax_rows(rows, cols, x.value().data(), out.data());
  Tensor probs = out;
  return x.graph().record(std::move(out), {x},
                          [x, rows, cols, probs = std::move(probs)](Graph& g,
                                                                    const Tensor& d) {
                            kernels::softmax_rows_backward(rows, cols, probs.data(),
                                                           d.data(), g.grad(x).data());
                          });
}

Var add_broadcast_rows(Var a, Var b) {
  need_rank(a, 3, "add_broadcast_rows a");
  const Shape& as = a.shape();
  const std::size_t N = as[0], M = as[1], C = as[2];
  expect_shape(b.value(), {N, 1, C}, "add_broadcast_rows b");
  Tensor out = a.value();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t c = 0; c < C; ++c) out[(n * M + m) * C + c] += b.value()[n * C + c];
  return a.graph().record(std::move(out), {a, b}, [a, b, N, M, C](Graph& g, const Tensor& d) {
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad(a);
      for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i];
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t m = 0; m < M; ++m)
          for (std::size_t c = 0; c < C; ++c) gb[n * C + c] += d[(n * M + m) * C + c];
    }
  });
}

}  // namespace dnl::ops
