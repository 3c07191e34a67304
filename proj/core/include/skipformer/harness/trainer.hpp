#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include <nlohmann/json.hpp>

#include "skipformer/harness/config.hpp"
#include "skipformer/harness/synthetic.hpp"
#include "skipformer/skipmodel.hpp"

namespace skf::harness {

// Linear warmup to the peak rate, then inverse square-root decay. step is
// 1-based; with no warmup the decay starts at step 1.
double learning_rate(const OptimizerConfig& o, std::uint64_t step);

// Fraction of a post-warmup batch falling back to all-crucial above which the
// batch counts towards the fallback warning.
inline constexpr double kFallbackWarnFraction = 0.1;

struct TrainOptions {
  std::filesystem::path resume;      // checkpoint to continue from
  std::ostream* progress = nullptr;  // human-readable progress, not the metrics log
};

struct TrainSummary {
  std::uint64_t steps = 0;
  std::size_t epochs = 0;
  double best_token_error_rate = 1.0;
  nlohmann::json last_record;
};

// Metrics log fields, one record per evaluation:
//   step, epoch, lr, train_loss, ctc_inter, ctc_final, aed_inter, aed_final
//     (means over utterances since the previous record),
//   eval_ter, eval_reduction (mean T_in/|h2|), eval_crucial_fraction,
//   fallback_fraction (training utterances that fell back to all-crucial),
//   skipped (utterances dropped as infeasible), fallback_storms (post-warmup
//   batches above the warning fraction), fallback_warning.
//
// Writes out_dir/{metrics.jsonl,best.ckpt,last.ckpt}. Evaluation runs on dev
// when given, otherwise on the training corpus.
TrainSummary train(const RunConfig& config, const Corpus& train_set, const Corpus* dev,
                   const TrainOptions& opts = {});

// Position in the schedule, stored next to the model in checkpoints.
struct TrainState {
  std::size_t epoch = 0;  // epochs completed
  std::size_t batch = 0;  // batches completed within the current epoch
  double best_token_error_rate = 1.0;
};

void save_model(const std::filesystem::path& path, model::SkipformerParams& p,
                const TrainState& state = {});
model::SkipformerParams load_model(const std::filesystem::path& path,
                                   TrainState* state = nullptr);

}  // namespace skf::harness
