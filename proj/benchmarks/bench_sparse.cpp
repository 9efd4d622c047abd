#include <benchmark/benchmark.h>

#include <random>

#include "malsig/sparse.hpp"

namespace {

malsig::Dictionary gaussian(std::size_t dim, std::size_t families, std::size_t per_family) {
  std::mt19937_64 g(dim * 31 + per_family);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<malsig::LabeledVector> s;
  for (std::size_t f = 0; f < families; ++f)
    for (std::size_t i = 0; i < per_family; ++i) {
      malsig::LabeledVector v{std::vector<double>(dim), "f" + std::to_string(f)};
      for (auto& x : v.features) x = n(g);
      s.push_back(std::move(v));
    }
  return malsig::build_dictionary(s);
}

void BM_SolverSetup(benchmark::State& state) {
  const auto d = gaussian(static_cast<std::size_t>(state.range(0)), 5, 80);
  for (auto _ : state) benchmark::DoNotOptimize(malsig::L1Solver(d));
}
BENCHMARK(BM_SolverSetup)->Arg(48)->Arg(512)->Unit(benchmark::kMillisecond);

// Query = sparse combination of three columns, exact regime.
void BM_SolveSparseQuery(benchmark::State& state) {
  const auto d = gaussian(static_cast<std::size_t>(state.range(0)), 5, 80);
  const malsig::L1Solver solver(d);
  const Eigen::VectorXd w = 0.7 * d.columns.col(3) - 0.2 * d.columns.col(100) + 0.1 * d.columns.col(250);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(w, 1e-6));
}
BENCHMARK(BM_SolveSparseQuery)->Arg(48)->Arg(192)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ClassifySrc(benchmark::State& state) {
  const auto d = gaussian(static_cast<std::size_t>(state.range(0)), 5, 80);
  const malsig::L1Solver solver(d);
  std::mt19937_64 g(5);
  std::normal_distribution<double> n(0.0, 0.05);
  Eigen::VectorXd w = d.columns.col(42);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += n(g);
  for (auto _ : state) benchmark::DoNotOptimize(malsig::classify_src(solver, w, malsig::SrcOptions::descriptors()));
}
BENCHMARK(BM_ClassifySrc)->Arg(48)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
