#include <benchmark/benchmark.h>

#include <random>

#include "malsig/projection.hpp"

namespace {

malsig::ByteSignal signal_of(std::size_t n) {
  std::mt19937_64 g(n);
  malsig::ByteSignal s;
  s.bytes.resize(n);
  for (auto& x : s.bytes) x = static_cast<std::uint8_t>(g());
  return s;
}

void BM_ProjectionBuild(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(malsig::make_projection(d, 4096, 7));
}
BENCHMARK(BM_ProjectionBuild)->Arg(48)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ProjectCached(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto r = malsig::make_projection(d, 4096, 7);
  const auto s = signal_of(4096);
  for (auto _ : state) benchmark::DoNotOptimize(malsig::project(s, r));
}
BENCHMARK(BM_ProjectCached)->Arg(48)->Arg(192)->Arg(512);

// Above kMaxCachedEntries rows are regenerated on every projection.
void BM_ProjectStreamed(benchmark::State& state) {
  const std::size_t m = std::size_t{1} << 16;
  const auto r = malsig::make_projection(512, m, 7);
  const auto s = signal_of(m);
  for (auto _ : state) benchmark::DoNotOptimize(malsig::project(s, r));
}
BENCHMARK(BM_ProjectStreamed)->Unit(benchmark::kMillisecond);

}  // namespace
