#include <benchmark/benchmark.h>

#include <random>

#include <abdo/gmm.hpp>

namespace {

std::vector<double> mixture(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> a(50, 5), b(200, 10), c(120, 20);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = i % 3 == 0 ? a(rng) : (i % 3 == 1 ? b(rng) : c(rng));
  return x;
}

void BM_FitGmm(benchmark::State& state) {
  const auto x = mixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(abdo::fit_gmm_1d(x, static_cast<int>(state.range(1))));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitGmm)->Args({10000, 2})->Args({100000, 3})->Args({100000, 7})->Unit(benchmark::kMillisecond);

void BM_FitGmmWeighted(benchmark::State& state) {
  // Integer-valued intensities, as in CT.
  std::vector<double> values, counts;
  std::mt19937_64 rng(2);
  for (int v = -200; v <= 300; ++v) {
    values.push_back(v);
    counts.push_back(1.0 + static_cast<double>(rng() % 1000));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(abdo::fit_gmm_1d_weighted(values, counts, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_FitGmmWeighted)->Arg(3)->Arg(7)->Unit(benchmark::kMicrosecond);

}  // namespace
