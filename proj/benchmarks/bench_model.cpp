#include <benchmark/benchmark.h>

#include <random>

#include "skipformer/harness/bench.hpp"
#include "skipformer/skipmodel.hpp"

using namespace skf;

namespace {

// Desk-scale model on an input long enough for T = 256 subsampled frames.
struct Fixture {
  Fixture() : params(model::ModelConfig{}, 1) {
    std::mt19937_64 rng(5);
    x = {"bench", random_normal({1031, params.config.feature_dim}, 1.0, rng)};
  }
  model::SkipformerParams params;
  frontend::FeatureSequence x;
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

// range(0): percentage of subsampled frames kept crucial; 100 disables skipping.
static void BM_EncoderForward(benchmark::State& state) {
  const Fixture& f = fixture();
  const std::size_t t = frontend::subsampled_length(f.x.length());
  const double fraction = static_cast<double>(state.range(0)) / 100.0;
  const auto flags = harness::evenly_spaced_blank_flags(t, fraction);
  model::ForwardOptions opts;
  opts.skip = state.range(0) < 100;
  opts.final_head = false;
  opts.forced_blank_flags = opts.skip ? &flags : nullptr;
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(f.x, f.params, {}, opts));
  state.counters["T"] = static_cast<double>(t);
  state.counters["analytic_ratio"] = harness::analytic_attention_ratio(
      f.params.config.encoder.M, f.params.config.encoder.N, t,
      static_cast<std::size_t>(std::count(flags.begin(), flags.end(), false)));
}
BENCHMARK(BM_EncoderForward)->Arg(100)->Arg(50)->Arg(25)->Arg(10)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
