// Parallel (OpenMP) kernels vs the serial reference implementations.
// Shapes follow the training defaults: 32 features, 24x24 LR patches, batch 8.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "kasr/kernels.hpp"

namespace k = kasr::kernels;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// m x k times k x n; args: m, n, k
template <bool Reference>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto kk = static_cast<std::size_t>(state.range(2));
  const auto a = noise(m * kk, 1), b = noise(kk * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::gemm(m, n, kk, a.data(), b.data(), c.data(), false);
    } else {
      k::gemm(m, n, kk, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * m * n * kk * state.iterations(), benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}

// args: batch, channels, side; 3x3, stride 1, pad 1
k::Conv2dGeometry conv_geometry(const benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto s = static_cast<std::size_t>(state.range(2));
  return k::Conv2dGeometry::make(b, c, s, s, c, 3, 3, 1, 1);
}

template <bool Reference>
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = noise(g.batch * g.in_c * g.in_h * g.in_w, 3);
  const auto w = noise(g.out_c * g.patch_size(), 4);
  const auto bias = noise(g.out_c, 5);
  std::vector<float> y(g.batch * g.out_c * g.out_plane());
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::conv2d_forward<float>(g, x, w, bias, y);
    } else {
      k::conv2d_forward<float>(g, x, w, bias, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Reference>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = noise(g.batch * g.in_c * g.in_h * g.in_w, 6);
  const auto w = noise(g.out_c * g.patch_size(), 7);
  const auto gy = noise(g.batch * g.out_c * g.out_plane(), 8);
  std::vector<float> gx(x.size()), gw(w.size()), gb(g.out_c);
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::conv2d_backward<float>(g, x, w, gy, gx, gw, gb);
    } else {
      k::conv2d_backward<float>(g, x, w, gy, gx, gw, gb);
    }
    benchmark::DoNotOptimize(gx.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Reference>
void BM_MaxPool(benchmark::State& state) {
  const auto planes = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  const auto g = k::PoolGeometry::make(planes, s, s, 2, 2);
  const auto x = noise(planes * s * s, 9);
  std::vector<float> y(planes * g.out_h * g.out_w);
  std::vector<std::size_t> idx(y.size());
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::maxpool_forward<float>(g, x, y, idx);
    } else {
      k::maxpool_forward<float>(g, x, y, idx);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

// 32 output channels, 48x48 HR plane, 32*9 patch rows.
BENCHMARK(BM_Gemm<false>)->Name("gemm/parallel")->Args({32, 2304, 288})->Args({128, 576, 288});
BENCHMARK(BM_Gemm<true>)->Name("gemm/reference")->Args({32, 2304, 288})->Args({128, 576, 288});
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/parallel")->Args({8, 32, 24});
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/reference")->Args({8, 32, 24});
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/parallel")->Args({8, 32, 24});
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/reference")->Args({8, 32, 24});
BENCHMARK(BM_MaxPool<false>)->Name("maxpool/parallel")->Args({256, 48});
BENCHMARK(BM_MaxPool<true>)->Name("maxpool/reference")->Args({256, 48});

BENCHMARK_MAIN();
