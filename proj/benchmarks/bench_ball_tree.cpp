#include <benchmark/benchmark.h>

#include "malsig/synthetic.hpp"

namespace {

void BM_TreeBuild(benchmark::State& state) {
  const auto recs = malsig::synthetic::uniform_records(static_cast<std::size_t>(state.range(0)), 320, 1);
  for (auto _ : state) benchmark::DoNotOptimize(malsig::BallTree(recs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TreeBuild)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_TreeQueryClustered(benchmark::State& state) {
  malsig::synthetic::ClusteredOptions opt;
  opt.count = static_cast<std::size_t>(state.range(0));
  opt.cluster_size = opt.count / 200;
  const auto recs = malsig::synthetic::clustered_records(opt);
  const malsig::BallTree tree(recs);
  std::size_t i = 0;
  malsig::QueryStats stats;
  double visited = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.query(recs[(i++ * 7919) % recs.size()].descriptor, 10, &stats));
    visited += static_cast<double>(stats.nodes_visited);
  }
  state.counters["nodes_visited"] = benchmark::Counter(visited, benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_TreeQueryClustered)->Arg(10000)->Arg(100000);

void BM_BruteForce(benchmark::State& state) {
  const auto recs = malsig::synthetic::uniform_records(static_cast<std::size_t>(state.range(0)), 320, 2);
  const malsig::BallTree tree(recs);
  for (auto _ : state) benchmark::DoNotOptimize(tree.brute_force(recs[17].descriptor, 10));
}
BENCHMARK(BM_BruteForce)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
