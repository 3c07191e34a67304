#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skipformer/harness/config.hpp"
#include "skipformer/harness/synthetic.hpp"
#include "skipformer/skipmodel.hpp"

namespace skf::harness {

struct BenchOptions {
  std::vector<split::SplitMode> modes{split::kDefaultMode};
  std::size_t repeats = 3;
  std::optional<double> beta;
  // Replaces the thresholded posteriors with evenly spaced non-blank flags
  // covering this fraction of frames.
  std::optional<double> force_crucial_fraction;
  DecodeConfig decode{DecodeMethod::kRescoring, 4, 0.5};
  // Inner iterations are added until one timed pass takes at least this long.
  double min_pass_seconds = 0.05;
  bool time_full_path = true;
};

struct BenchRow {
  std::string label;  // "no-skip" or "mode<k>"
  int mode = 0;       // 0 for no-skip
  std::size_t M = 0;
  std::size_t N = 0;
  std::size_t utterances = 0;
  double mean_T = 0.0;
  double mean_h2_length = 0.0;
  double mean_crucial = 0.0;
  double mean_reduction = 0.0;
  double mean_crucial_fraction = 0.0;
  double encoder_seconds = 0.0;  // per utterance, median over repeats
  double full_seconds = 0.0;     // per utterance, encoder + rescoring decode
  double analytic_ratio = 1.0;   // mean over utterances of (M T^2 + N c^2) / ((M+N) T^2)
  double counted_ratio = 1.0;    // counted attention score MACs, skip / no-skip
  double measured_ratio = 1.0;   // encoder wall time, skip / no-skip
  double agreement = 1.0;        // measured / analytic
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

// Flags for a forced crucial fraction f: frame t is non-blank iff
// floor((t + 1) f) > floor(t f).
std::vector<bool> evenly_spaced_blank_flags(std::size_t length, double fraction);

double analytic_attention_ratio(std::size_t M, std::size_t N, std::size_t T, std::size_t crucial);

// Times the no-skip baseline plus one row per requested mode.
BenchReport bench(const model::SkipformerParams& p, const Corpus& corpus,
                  const model::LossWeights& weights, const BenchOptions& opts);

std::string to_tsv(const BenchReport& r);
std::string to_text(const BenchReport& r);

struct SweepOptions {
  std::vector<std::pair<std::size_t, std::size_t>> splits{{2, 2}, {1, 3}, {3, 1}};
  BenchOptions bench;
  std::ostream* progress = nullptr;
};

// Trains one model per (M, N) under out_dir/M<m>N<n> with the base config,
// then benches every requested mode on bench_set.
BenchReport sweep(const RunConfig& base, const Corpus& train_set, const Corpus* dev,
                  const Corpus& bench_set, const SweepOptions& opts);

}  // namespace skf::harness
