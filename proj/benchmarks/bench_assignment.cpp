#include <benchmark/benchmark.h>

#include "stoa/assignment.hpp"
#include "stoa/rng.hpp"

using namespace stoa;

static void BM_SolveAssignment(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(11);
  Mat scores(n, n);
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores.data()[i] = rng.uniform();
  for (auto _ : state) {
    Assignment a = solve_assignment(scores);
    benchmark::DoNotOptimize(a.total_score);
  }
}
BENCHMARK(BM_SolveAssignment)->Arg(4)->Arg(8)->Arg(16)->Arg(32);

BENCHMARK_MAIN();
