#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <random>

#include "dnl/errors.hpp"
#include "dnl/graph.hpp"
#include "dnl/kernels.hpp"
#include "dnl/ops.hpp"
#include "dnl/reference.hpp"
#include "oracles.hpp"

using namespace dnl;

namespace {

Tensor forward(const std::function<Var(Graph&)>& f) {
  Graph g;
  return f(g).value();
}

}  // namespace

TEST(Tensor, RejectsMismatchedDataAndZeroDims) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  t.at({1, 2}) = 4;
  EXPECT_EQ(t[5], 4);
}

TEST(Conv2d, ScalarProduct) {
  const Tensor y = forward([](Graph& g) {
    return ops::conv2d(g.constant(Tensor({1, 1, 1, 1}, {5})), g.constant(Tensor({1, 1, 1, 1}, {2})),
                       g.constant(Tensor({1}, {0})), 1, 0);
  });
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 10);
}

TEST(Conv2d, BoxSumOnOnes) {
  const Tensor y = forward([](Graph& g) {
    return ops::conv2d(g.constant(Tensor({1, 1, 3, 3}, 1.0)), g.constant(Tensor({1, 1, 3, 3}, 1.0)),
                       Var{}, 1, 1);
  });
  EXPECT_EQ(y.at({0, 0, 1, 1}), 9);
  EXPECT_EQ(y.at({0, 0, 0, 0}), 4);
  EXPECT_EQ(y.at({0, 0, 0, 2}), 4);
  EXPECT_EQ(y.at({0, 0, 2, 0}), 4);
  EXPECT_EQ(y.at({0, 0, 2, 2}), 4);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(3);
  for (auto [stride, pad, k] : {std::tuple{1, 1, 3}, {1, 0, 3}, {2, 1, 3}, {1, 2, 5}, {2, 0, 1}}) {
    const Tensor x = Tensor::randn({2, 4, 8, 8}, rng);
    const Tensor w = Tensor::randn({3, 4, std::size_t(k), std::size_t(k)}, rng);
    const Tensor b = Tensor::randn({3}, rng);
    const Tensor y = forward([&](Graph& g) {
      return ops::conv2d(g.constant(x), g.constant(w), g.constant(b), stride, pad);
    });
    const Tensor expect = oracle::conv2d(x, w, b, stride, pad);
    ASSERT_EQ(y.shape(), expect.shape());
    EXPECT_LE(max_abs_diff(y, expect), 1e-12) << "stride " << stride << " pad " << pad;
  }
}

TEST(Conv2d, OutputSizeFollowsFloorFormula) {
  std::mt19937_64 rng(4);
  const Tensor y = forward([&](Graph& g) {
    return ops::conv2d(g.constant(Tensor::randn({1, 2, 9, 7}, rng)),
                       g.constant(Tensor::randn({1, 2, 3, 3}, rng)), Var{}, 2, 1);
  });
  EXPECT_EQ(y.shape(), (Shape{1, 1, (9 + 2 - 3) / 2 + 1, (7 + 2 - 3) / 2 + 1}));
}

TEST(Conv2d, RejectsChannelMismatch) {
  Graph g;
  const Var x = g.constant(Tensor({1, 3, 4, 4}));
  const Var w = g.constant(Tensor({2, 4, 3, 3}));
  try {
    ops::conv2d(x, w, Var{}, 1, 1);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2, 4, 3, 3]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ops::conv2d(x, g.constant(Tensor({2, 3, 2, 2})), Var{}, 1, 0), ShapeError);
  EXPECT_THROW(ops::conv2d(x, g.constant(Tensor({2, 3, 7, 7})), Var{}, 1, 1), ShapeError);
}

TEST(DepthwiseMultiscale, ChannelGroupsOfEqualSize) {
  std::mt19937_64 rng(5);
  const Tensor x = Tensor::randn({1, 8, 9, 9}, rng);
  std::array<Tensor, 4> kernels;
  const std::size_t sizes[4] = {1, 3, 5, 7};
  for (int i = 0; i < 4; ++i) kernels[i] = Tensor::randn({2, 1, sizes[i], sizes[i]}, rng);
  const Tensor y = forward([&](Graph& g) {
    return ops::depthwise_multiscale_conv(
        g.constant(x), {g.constant(kernels[0]), g.constant(kernels[1]), g.constant(kernels[2]),
                        g.constant(kernels[3])});
  });
  ASSERT_EQ(y.shape(), x.shape());
  for (int grp = 0; grp < 4; ++grp) {
    Tensor xs({1, 2, 9, 9});
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 81; ++i) xs[c * 81 + i] = x[(grp * 2 + c) * 81 + i];
    const Tensor expect = oracle::depthwise_same(xs, kernels[grp]);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 81; ++i)
        EXPECT_NEAR(y[(grp * 2 + c) * 81 + i], expect[c * 81 + i], 1e-12);
  }
}

TEST(DepthwiseMultiscale, IdentityKernelsPassThrough) {
  std::mt19937_64 rng(6);
  const Tensor x = Tensor::randn({2, 12, 6, 6}, rng);
  std::array<Tensor, 4> kernels;
  const std::size_t sizes[4] = {1, 3, 5, 7};
  for (int i = 0; i < 4; ++i) {
    const std::size_t k = sizes[i];
    kernels[i] = Tensor({3, 1, k, k});
    for (std::size_t c = 0; c < 3; ++c) kernels[i].at({c, 0, k / 2, k / 2}) = 1.0;
  }
  const Tensor y = forward([&](Graph& g) {
    return ops::depthwise_multiscale_conv(
        g.constant(x), {g.constant(kernels[0]), g.constant(kernels[1]), g.constant(kernels[2]),
                        g.constant(kernels[3])});
  });
  EXPECT_EQ(y, x);
}

TEST(DepthwiseMultiscale, ChannelsNotDivisibleByFour) {
  Graph g;
  const Var x = g.constant(Tensor({1, 6, 4, 4}));
  std::array<Var, 4> k;
  const std::size_t sizes[4] = {1, 3, 5, 7};
  for (int i = 0; i < 4; ++i) k[i] = g.constant(Tensor({1, 1, sizes[i], sizes[i]}));
  EXPECT_THROW(ops::depthwise_multiscale_conv(x, k), ConfigError);
}

TEST(Relu, ValuesAndGradients) {
  Graph g;
  const Var x = g.parameter("x", Tensor({3}, {-1, 0, 2}));
  const Var y = ops::relu(x);
  EXPECT_EQ(y.value(), Tensor({3}, {0, 0, 2}));
  g.backward(ops::sum(y));
  EXPECT_EQ(*g.gradient(x), Tensor({3}, {0, 0, 1}));
}

TEST(Relu, AllNegativeGivesZeros) {
  std::mt19937_64 rng(7);
  Tensor x = Tensor::uniform({4, 5}, rng, -3.0, -0.1);
  const Tensor y = forward([&](Graph& g) { return ops::relu(g.constant(x)); });
  EXPECT_EQ(y, Tensor({4, 5}, 0.0));
}

TEST(Softmax, UniformRow) {
  const Tensor y = forward([](Graph& g) { return ops::softmax(g.constant(Tensor({1, 3}, 0.0))); });
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y[i], 1.0 / 3.0);
}

TEST(Softmax, ShiftInvariant) {
  const Tensor y = forward(
      [](Graph& g) { return ops::softmax(g.constant(Tensor({2, 3}, {1, 2, 3, 11, 12, 13}))); });
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y[i], y[3 + i], 1e-12);
}

TEST(Softmax, RowsSumToOneAndMatchDefinition) {
  std::mt19937_64 rng(8);
  const Tensor x = Tensor::randn({5, 7}, rng, 3.0);
  const Tensor y = forward([&](Graph& g) { return ops::softmax(g.constant(x)); });
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    std::vector<double> row(x.data().begin() + r * 7, x.data().begin() + r * 7 + 7);
    for (std::size_t c = 0; c < 7; ++c) {
      s += y[r * 7 + c];
      EXPECT_NEAR(y[r * 7 + c], oracle::rowwise_softmax_entry(row, c), 1e-12);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Softmax, LargeLogitsStayFinite) {
  const Tensor y = forward(
      [](Graph& g) { return ops::softmax(g.constant(Tensor({1, 3}, {1000, 1001, 999}))); });
  EXPECT_TRUE(y.all_finite());
}

TEST(BatchNorm, ConstantChannelGivesBeta) {
  Graph g;
  BatchNormState state(2);
  Tensor x({3, 2, 2, 2});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i / 4) % 2 == 0 ? 5.0 : -2.0;
  const Tensor y = ops::batchnorm(g.constant(x), g.constant(Tensor({2}, {1.5, 2.0})),
                                  g.constant(Tensor({2}, {0.25, -0.75})), state, Mode::train)
                       .value();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], (i / 4) % 2 == 0 ? 0.25 : -0.75);
}

TEST(BatchNorm, StandardizedInputIsNearlyUnchanged) {
  std::mt19937_64 rng(9);
  Tensor x = Tensor::randn({4, 3, 5, 5}, rng);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    const std::size_t count = 4 * 25;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) mean += x[(n * 3 + c) * 25 + i];
    mean /= count;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) var += std::pow(x[(n * 3 + c) * 25 + i] - mean, 2);
    var /= count;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) {
        double& v = x[(n * 3 + c) * 25 + i];
        v = (v - mean) / std::sqrt(var);
      }
  }
  Graph g;
  BatchNormState state(3);
  const Tensor y = ops::batchnorm(g.constant(x), g.constant(Tensor({3}, 1.0)),
                                  g.constant(Tensor({3}, 0.0)), state, Mode::train)
                       .value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(y[i], x[i] / std::sqrt(1.0 + 1e-5), 1e-12);
    EXPECT_LE(std::abs(y[i] - x[i]), 1e-5 * std::abs(x[i]));
  }
}

TEST(BatchNorm, TrainOutputHasUnitStatistics) {
  std::mt19937_64 rng(10);
  const Tensor x = Tensor::randn({6, 4, 3, 3}, rng, 5.0);
  Graph g;
  BatchNormState state(4);
  const Tensor y = ops::batchnorm(g.constant(x), g.constant(Tensor({4}, 1.0)),
                                  g.constant(Tensor({4}, 0.0)), state, Mode::train)
                       .value();
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0, var = 0;
    for (std::size_t n = 0; n < 6; ++n)
      for (std::size_t i = 0; i < 9; ++i) mean += y[(n * 4 + c) * 9 + i];
    mean /= 54;
    for (std::size_t n = 0; n < 6; ++n)
      for (std::size_t i = 0; i < 9; ++i) var += std::pow(y[(n * 4 + c) * 9 + i] - mean, 2);
    var /= 54;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(BatchNorm, RunningStatisticsUseMomentum) {
  const Tensor x({2, 1, 1, 2}, {1, 3, 5, 7});  // mean 4, biased var 5
  Graph g;
  BatchNormState state(1);
  ops::batchnorm(g.constant(x), g.constant(Tensor({1}, 1.0)), g.constant(Tensor({1}, 0.0)), state,
                 Mode::train);
  EXPECT_DOUBLE_EQ(state.running_mean[0], 0.1 * 4.0);
  EXPECT_DOUBLE_EQ(state.running_var[0], 0.9 * 1.0 + 0.1 * 5.0);
}

TEST(BatchNorm, EvalBeforeTrainingUsesInitialStatistics) {
  std::mt19937_64 rng(11);
  const Tensor x = Tensor::randn({2, 2, 3, 3}, rng);
  Graph g;
  BatchNormState state(2);
  const Tensor y = ops::batchnorm(g.constant(x), g.constant(Tensor({2}, 1.0)),
                                  g.constant(Tensor({2}, 0.0)), state, Mode::eval)
                       .value();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i] / std::sqrt(1.0 + 1e-5), 1e-15);
}

TEST(AvgPool, MeanOfBlock) {
  const Tensor y = forward(
      [](Graph& g) { return ops::avgpool2d(g.constant(Tensor({1, 1, 2, 2}, {1, 3, 5, 7})), 2, 2); });
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 4);
}

TEST(AvgPool, ConstantInput) {
  const Tensor y = forward(
      [](Graph& g) { return ops::avgpool2d(g.constant(Tensor({2, 3, 6, 6}, 2.5)), 2, 2); });
  EXPECT_EQ(y, Tensor({2, 3, 3, 3}, 2.5));
}

TEST(AvgPool, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(12);
  const Tensor x = Tensor::randn({2, 3, 7, 7}, rng);
  for (auto [k, s] : {std::pair{2, 2}, {3, 1}, {3, 2}}) {
    const Tensor y = forward([&](Graph& g) { return ops::avgpool2d(g.constant(x), k, s); });
    const std::size_t oh = (7 - k) / s + 1;
    ASSERT_EQ(y.shape(), (Shape{2, 3, oh, oh}));
    for (std::size_t p = 0; p < 6; ++p)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < oh; ++j) {
          double sum = 0;
          for (int u = 0; u < k; ++u)
            for (int v = 0; v < k; ++v) sum += x[p * 49 + (i * s + u) * 7 + j * s + v];
          EXPECT_NEAR(y[(p * oh + i) * oh + j], sum / (k * k), 1e-12);
        }
  }
}

TEST(Upsample, NearestRestoresOddSize) {
  const Tensor y = forward([](Graph& g) {
    return ops::upsample_nearest(g.constant(Tensor({1, 1, 2, 2}, {1, 2, 3, 4})), 2, 5, 5);
  });
  ASSERT_EQ(y.shape(), (Shape{1, 1, 5, 5}));
  EXPECT_EQ(y.at({0, 0, 0, 0}), 1);
  EXPECT_EQ(y.at({0, 0, 1, 1}), 1);
  EXPECT_EQ(y.at({0, 0, 0, 3}), 2);
  EXPECT_EQ(y.at({0, 0, 4, 4}), 4);  // last row and column repeat the edge
  EXPECT_EQ(y.at({0, 0, 4, 0}), 3);
}

TEST(Backward, LinearLossGradientIsInput) {
  std::mt19937_64 rng(13);
  const Tensor x = Tensor::randn({6}, rng);
  Graph g;
  const Var w = g.parameter("w", Tensor::randn({6}, rng));
  g.backward(ops::sum(ops::mul(w, g.constant(x))));
  EXPECT_EQ(g.parameter_gradients().at("w"), x);
}

TEST(Backward, InactiveReluGivesZeroGradient) {
  Graph g;
  const Var w = g.parameter("w", Tensor({1}, {1.0}));
  const Var r = ops::relu(ops::scale(w, -1.0));
  g.backward(ops::sum(ops::mul(r, r)));
  EXPECT_EQ(g.parameter_gradients().at("w")[0], 0.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  Graph g;
  const Var w = g.parameter("w", Tensor({2}, 1.0));
  EXPECT_THROW(g.backward(w), ShapeError);
}

TEST(Backward, SharedInputAccumulates) {
  Graph g;
  const Var w = g.parameter("w", Tensor({1}, {3.0}));
  g.backward(ops::sum(ops::add(ops::mul(w, w), w)));  // d/dw (w^2 + w) = 2w + 1
  EXPECT_EQ(g.parameter_gradients().at("w")[0], 7.0);
}

TEST(Graph, ParameterNamesAreUnique) {
  Graph g;
  g.parameter("w", Tensor({1}));
  EXPECT_THROW(g.parameter("w", Tensor({1})), ConfigError);
}

TEST(Graph, UnreachedParameterHasZeroGradient) {
  Graph g;
  const Var a = g.parameter("a", Tensor({2}, 1.0));
  g.parameter("b", Tensor({3}, 1.0));
  g.backward(ops::sum(a));
  EXPECT_EQ(g.parameter_gradients().at("b"), Tensor({3}, 0.0));
}

TEST(Backward, DeterministicAcrossRuns) {
  std::mt19937_64 rng(14);
  const Tensor x = Tensor::randn({2, 4, 6, 6}, rng), w = Tensor::randn({4, 4, 3, 3}, rng);
  auto run = [&] {
    Graph g;
    const Var wv = g.parameter("w", w);
    const Var y = ops::conv2d(g.constant(x), wv, Var{}, 1, 1);
    g.backward(ops::sum(ops::mul(ops::relu(y), y)));
    return std::pair{y.value(), g.parameter_gradients().at("w")};
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Matmul, MatchesReferenceWithTransposes) {
  std::mt19937_64 rng(15);
  const Tensor a = Tensor::randn({1, 3, 4}, rng), b = Tensor::randn({1, 4, 5}, rng);
  const Tensor expect = reference::matmul(a.reshaped({3, 4}), b.reshaped({4, 5}));
  Tensor at({1, 4, 3}), bt({1, 5, 4});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) at[j * 3 + i] = a[i * 4 + j];
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) bt[j * 4 + i] = b[i * 5 + j];
  for (int mode = 0; mode < 4; ++mode) {
    const bool ta = mode & 1, tb = mode & 2;
    const Tensor y = forward([&](Graph& g) {
      return ops::matmul(g.constant(ta ? at : a), g.constant(tb ? bt : b), ta, tb);
    });
    EXPECT_LE(max_abs_diff(y.reshaped({3, 5}), expect), 1e-12) << mode;
  }
}

// The OpenMP kernels must reproduce the serial reference bit for bit,
// whatever the thread count.
TEST(Kernels, ParallelMatchesSerialReference) {
  std::mt19937_64 rng(16);
  const Tensor x = Tensor::randn({4, 16, 16, 16}, rng), w = Tensor::randn({16, 16, 3, 3}, rng);
  const Tensor b = Tensor::randn({16}, rng);
  const Tensor expect = reference::conv2d(x, w, b, 1, 1);
  const Tensor dw = Tensor::randn({16, 1, 5, 5}, rng);
  const Tensor expect_dw = reference::depthwise_conv2d(x, dw);
  const Tensor ga = Tensor::randn({1, 128, 96}, rng), gb = Tensor::randn({1, 96, 80}, rng);
  const Tensor expect_mm = reference::matmul(ga.reshaped({128, 96}), gb.reshaped({96, 80}));
  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    const Tensor y = forward([&](Graph& g) {
      return ops::conv2d(g.constant(x), g.constant(w), g.constant(b), 1, 1);
    });
    EXPECT_EQ(y, expect) << threads << " threads";
    Tensor out(x.shape());
    kernels::depthwise_forward({4, 16, 16, 16, 0, 16, 5}, x.data(), dw.data(), out.data());
    EXPECT_EQ(out, expect_dw) << threads << " threads";
    const Tensor mm = forward([&](Graph& g) { return ops::matmul(g.constant(ga), g.constant(gb)); });
    EXPECT_EQ(mm.reshaped({128, 80}), expect_mm) << threads << " threads";
  }
  omp_set_num_threads(saved);
}

TEST(SoftmaxCrossEntropy, KnownValue) {
  Graph g;
  const Var logits = g.parameter("z", Tensor({2, 2}, {0, 0, 1, 0}));
  const std::vector<int> labels{0, 1};
  const Var loss = ops::softmax_cross_entropy(logits, labels);
  const double expect = 0.5 * (std::log(2.0) + std::log(1.0 + std::exp(1.0)));
  EXPECT_NEAR(loss.value()[0], expect, 1e-15);
  EXPECT_THROW(ops::softmax_cross_entropy(logits, std::vector<int>{0, 2}), ShapeError);
}
