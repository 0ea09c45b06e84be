#include <benchmark/benchmark.h>

#include <abdo/synth.hpp>

namespace {

abdo::LabelMap phantom(std::int64_t n) {
  abdo::LabelMap m(abdo::Geometry({n, n, n}, {1.5, 1.5, 1.5}), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto p = m.coordinates(i);
    m[i] = static_cast<abdo::Label>((p[0] * 4 / n) + (p[1] * 2 / n));
  }
  return m;
}

void BM_SpatialTransform(benchmark::State& state) {
  const auto n = state.range(0);
  abdo::GenerationConfig cfg;
  abdo::Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(abdo::sample_spatial_transform({n, n, n}, cfg, rng));
}
BENCHMARK(BM_SpatialTransform)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SynthesizeIntensities(benchmark::State& state) {
  const auto labels = phantom(state.range(0));
  std::map<abdo::Label, abdo::IntensityParams> params;
  for (abdo::Label l = 0; l < 6; ++l) params[l] = {40.0 * l, 10.0};
  abdo::Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(abdo::synthesize_intensities(labels, params, rng));
}
BENCHMARK(BM_SynthesizeIntensities)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_BiasField(benchmark::State& state) {
  const abdo::ScalarVolume image(abdo::Geometry({128, 128, 128}), 0.5f);
  abdo::GenerationConfig cfg;
  abdo::Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(abdo::apply_bias_field(image, cfg, rng));
}
BENCHMARK(BM_BiasField)->Unit(benchmark::kMillisecond);

void BM_DegradeResolution(benchmark::State& state) {
  const abdo::ScalarVolume image(abdo::Geometry({128, 128, 128}), 0.5f);
  for (auto _ : state) benchmark::DoNotOptimize(abdo::degrade_resolution(image, 2, 6.0, 1.5));
}
BENCHMARK(BM_DegradeResolution)->Unit(benchmark::kMillisecond);

void BM_GenerateTrainingPair(benchmark::State& state) {
  const auto labels = phantom(96);
  abdo::GenerationConfig cfg;
  cfg.target_shape = {96, 96, 96};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(abdo::generate_training_pair(labels, {}, cfg, seed++));
}
BENCHMARK(BM_GenerateTrainingPair)->Unit(benchmark::kMillisecond);

}  // namespace
