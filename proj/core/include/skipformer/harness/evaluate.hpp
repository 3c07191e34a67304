#pragma once

#include <optional>
#include <vector>

#include "skipformer/harness/config.hpp"
#include "skipformer/harness/metrics.hpp"
#include "skipformer/harness/synthetic.hpp"
#include "skipformer/skipmodel.hpp"

namespace skf::harness {

struct EvalOptions {
  DecodeConfig decode;
  std::optional<split::SplitMode> mode;  // overrides LossWeights::mode
  std::optional<double> beta;            // overrides LossWeights::beta
  bool skip = true;
};

struct Distribution {
  double mean = 0.0;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

Distribution summarize(std::vector<double> values);

struct EvalReport {
  ErrorCounter errors;
  Distribution reduction;        // T_in / |h2| per utterance
  Distribution crucial_fraction; // |crucial| / T
  Distribution trivial_fraction;
  Distribution ignoring_fraction;
  std::size_t fallbacks = 0;
  std::vector<TraceRecord> traces;
  std::vector<ctc::TokenSequence> hypotheses;

  double token_error_rate() const { return errors.rate(); }
  // Pooled: sum T_in / sum |h2|.
  double pooled_reduction() const;
};

// Throws ConfigError when the corpus uses tokens outside the model vocabulary.
void check_vocabulary(const model::SkipformerParams& p, const Corpus& corpus);

EvalReport evaluate(const model::SkipformerParams& p, const Corpus& corpus,
                    const model::LossWeights& weights, const EvalOptions& opts);

nlohmann::json to_json(const EvalReport& r);

}  // namespace skf::harness
