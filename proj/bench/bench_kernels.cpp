// Serial reference loops against the OpenMP kernels. The kernel cases take
// the thread count as their argument.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "dnl/kernels.hpp"
#include "dnl/reference.hpp"

namespace {

using dnl::Tensor;

struct ConvCase {
  ConvCase() {
    std::mt19937_64 rng(1);
    x = Tensor::randn({16, 16, 7, 7}, rng);
    w = Tensor::randn({16, 16, 3, 3}, rng);
    b = Tensor::randn({16}, rng);
    dw = Tensor::randn({16, 1, 5, 5}, rng);
  }
  Tensor x, w, b, dw;
};

const ConvCase& conv_case() {
  static const ConvCase c;
  return c;
}

void set_threads(const benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
}

void BM_Conv2dReference(benchmark::State& state) {
  const auto& c = conv_case();
  for (auto _ : state) benchmark::DoNotOptimize(dnl::reference::conv2d(c.x, c.w, c.b, 1, 1));
}
BENCHMARK(BM_Conv2dReference);

void BM_Conv2dKernel(benchmark::State& state) {
  set_threads(state);
  const auto& c = conv_case();
  Tensor out({16, 16, 7, 7});
  for (auto _ : state) {
    dnl::kernels::conv2d_forward({16, 16, 7, 7, 16, 3, 1, 1}, c.x.data(), c.w.data(), c.b.data(),
                                 out.data());
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_Conv2dKernel)->Arg(1)->Arg(2)->Arg(4);

void BM_DepthwiseReference(benchmark::State& state) {
  const auto& c = conv_case();
  for (auto _ : state) benchmark::DoNotOptimize(dnl::reference::depthwise_conv2d(c.x, c.dw));
}
BENCHMARK(BM_DepthwiseReference);

void BM_DepthwiseKernel(benchmark::State& state) {
  set_threads(state);
  const auto& c = conv_case();
  Tensor out(c.x.shape());
  for (auto _ : state) {
    dnl::kernels::depthwise_forward({16, 16, 7, 7, 0, 16, 5}, c.x.data(), c.dw.data(),
                                    out.data());
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_DepthwiseKernel)->Arg(1)->Arg(2)->Arg(4);

struct GemmCase {
  GemmCase() {
    std::mt19937_64 rng(2);
    a = Tensor::randn({49, 64}, rng);
    b = Tensor::randn({64, 49}, rng);
  }
  Tensor a, b;
};

const GemmCase& gemm_case() {
  static const GemmCase c;
  return c;
}

void BM_GemmReference(benchmark::State& state) {
  const auto& c = gemm_case();
  for (auto _ : state) benchmark::DoNotOptimize(dnl::reference::matmul(c.a, c.b));
}
BENCHMARK(BM_GemmReference);

void BM_GemmKernel(benchmark::State& state) {
  set_threads(state);
  const auto& c = gemm_case();
  Tensor out({49, 49});
  for (auto _ : state) {
    dnl::kernels::batched_gemm({1, 49, 64, 49, false, false}, c.a.data(), c.b.data(), out.data(),
                               false);
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_GemmKernel)->Arg(1)->Arg(2)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
