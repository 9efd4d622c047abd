#include <benchmark/benchmark.h>

#include <random>

#include "malsig/features.hpp"

namespace {

std::vector<std::uint8_t> noise(std::size_t n) {
  std::mt19937_64 g(n);
  std::vector<std::uint8_t> b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(g());
  return b;
}

void BM_ToImage(benchmark::State& state) {
  const auto raw = noise(static_cast<std::size_t>(state.range(0)));
  const auto policy = malsig::WidthPolicy::standard();
  for (auto _ : state) benchmark::DoNotOptimize(malsig::to_image(malsig::to_signal(raw), policy));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToImage)->Arg(4 << 10)->Arg(64 << 10)->Arg(1 << 20);

// Whole descriptor path: bytes -> image -> resize -> 20 filters -> pooling.
void BM_GistDescriptor(benchmark::State& state) {
  const auto raw = noise(static_cast<std::size_t>(state.range(0)));
  const malsig::FeatureExtractor fx(malsig::FeatureConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(fx.extract(raw));
}
BENCHMARK(BM_GistDescriptor)->Arg(4 << 10)->Arg(256 << 10)->Unit(benchmark::kMillisecond);

void BM_FilterBankBuild(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(malsig::GistExtractor{});
}
BENCHMARK(BM_FilterBankBuild)->Unit(benchmark::kMillisecond);

}  // namespace
