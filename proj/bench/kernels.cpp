#include <benchmark/benchmark.h>

#include <vector>

#include "plls/rng.hpp"
#include "plls/tensor/kernels.hpp"

using namespace plls;

namespace {

std::vector<Real> random_buffer(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Real> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

using Gemm = void (*)(std::size_t, std::size_t, std::size_t, const Real*, const Real*, Real*, bool);

// Square products of side state.range(0).
template <Gemm F>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n * n, 1), b = random_buffer(n * n, 2);
  std::vector<Real> c(n * n);
  for (auto _ : state) {
    F(n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

// First encoder layer of the pixel state model: 3 x 64 x 64 inputs, 32
// filters of 4 x 4, stride 2; batch from state.range(0).
kernels::ConvGeometry encoder_geometry(std::size_t batch) { return {batch, 3, 64, 64, 4, 2}; }

template <bool Parallel>
void BM_Conv2d(benchmark::State& state) {
  const auto g = encoder_geometry(static_cast<std::size_t>(state.range(0)));
  const std::size_t filters = 32;
  const auto input = random_buffer(g.batch * g.in_channels * g.height * g.width, 3);
  const auto weights = random_buffer(filters * g.patch_size(), 4);
  const auto bias = random_buffer(filters, 5);
  std::vector<Real> out(g.batch * filters * g.out_positions());
  for (auto _ : state) {
    if (Parallel) kernels::conv2d_forward(g, filters, input.data(), weights.data(), bias.data(), out.data());
    else kernels::serial::conv2d_forward(g, filters, input.data(), weights.data(), bias.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(2 * g.batch * filters * g.out_positions() * g.patch_size()));
}

// Last decoder layer: 32 channels back to a 3 x 64 x 64 image.
template <bool Parallel>
void BM_Deconv2d(benchmark::State& state) {
  const auto g = encoder_geometry(static_cast<std::size_t>(state.range(0)));
  const std::size_t in_channels = 32;
  const auto input = random_buffer(g.batch * in_channels * g.out_positions(), 6);
  const auto weights = random_buffer(in_channels * g.patch_size(), 7);
  const auto bias = random_buffer(g.in_channels, 8);
  std::vector<Real> out(g.batch * g.in_channels * g.height * g.width);
  for (auto _ : state) {
    if (Parallel) kernels::deconv2d_forward(g, in_channels, input.data(), weights.data(), bias.data(), out.data());
    else kernels::serial::deconv2d_forward(g, in_channels, input.data(), weights.data(), bias.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(2 * g.batch * in_channels * g.out_positions() * g.patch_size()));
}

}  // namespace

BENCHMARK(BM_Gemm<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Gemm<kernels::gemm_nn>)->Name("gemm_nn/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Gemm<kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Gemm<kernels::gemm_nt>)->Name("gemm_nt/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Gemm<kernels::serial::gemm_tn>)->Name("gemm_tn/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Gemm<kernels::gemm_tn>)->Name("gemm_tn/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Conv2d<false>)->Name("conv2d/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_Conv2d<true>)->Name("conv2d/parallel")->Arg(8)->Arg(32);
BENCHMARK(BM_Deconv2d<false>)->Name("deconv2d/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_Deconv2d<true>)->Name("deconv2d/parallel")->Arg(8)->Arg(32);

BENCHMARK_MAIN();
