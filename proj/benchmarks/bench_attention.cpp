#include <benchmark/benchmark.h>

#include "stoa/nn.hpp"

using namespace stoa;

static void BM_MultiheadAttention(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const int width = 48, heads = 4;
  Rng rng(7);
  ParamStore ps;
  AttentionWeights w(ps, "attn", width, heads, rng);
  Mat x(L, width);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * 0.1;
  for (auto _ : state) {
    Tensor seq = parameter(x);
    Tensor out = multihead_attention(seq, seq, nullptr, w);
    Tensor loss = sum_all(out);
    backward(loss);
    benchmark::DoNotOptimize(loss.scalar());
    ps.zero_grads();
  }
}
BENCHMARK(BM_MultiheadAttention)->Arg(17)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
