#include <benchmark/benchmark.h>

#include <random>

#include "skipformer/ctc.hpp"
#include "skipformer/layers.hpp"
#include "skipformer/numerics/ops.hpp"
#include "skipformer/splitter.hpp"

using namespace skf;

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const num::Var a(random_normal({n, n}, 1.0, rng));
  const num::Var b(random_normal({n, n}, 1.0, rng));
  for (auto _ : state) benchmark::DoNotOptimize(num::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

static void BM_SoftmaxRows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const num::Var a(random_normal({n, n}, 3.0, rng));
  for (auto _ : state) benchmark::DoNotOptimize(num::softmax_rows(a));
}
BENCHMARK(BM_SoftmaxRows)->Arg(64)->Arg(256);

static void BM_CtcLossBackward(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  const num::Var logits(random_normal({frames, 20}, 1.0, rng), true);
  ctc::TokenSequence y;
  for (std::size_t i = 0; i < frames / 8; ++i) y.push_back(1 + i % 19);
  for (auto _ : state) {
    num::Tape tape;
    num::TapeScope scope(tape);
    const ctc::PosteriorGrid g{num::log_softmax_rows(logits)};
    tape.backward(ctc::ctc_loss(g, y));
  }
}
BENCHMARK(BM_CtcLossBackward)->Arg(64)->Arg(256);

static void BM_AssignGroups(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::vector<bool> flags(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = rng() % 4 != 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(split::assign_groups(split::compute_sets(flags), split::kDefaultMode));
  }
}
BENCHMARK(BM_AssignGroups)->Arg(256)->Arg(4096);
