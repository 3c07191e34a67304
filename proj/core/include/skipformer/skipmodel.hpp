#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "skipformer/ctc.hpp"
#include "skipformer/decoder.hpp"
#include "skipformer/encoder.hpp"
#include "skipformer/frontend.hpp"
#include "skipformer/numerics/checkpoint.hpp"
#include "skipformer/splitter.hpp"

namespace skf::model {

struct ModelConfig {
  encoder::EncoderConfig encoder;
  std::size_t feature_dim = 16;
  std::size_t vocab_size = 20;  // CTC vocabulary including blank
  std::size_t decoder_depth = 2;

  void validate() const;
};

struct SkipformerParams {
  SkipformerParams() = default;
  SkipformerParams(const ModelConfig& config, std::uint64_t seed);

  ModelConfig config;
  frontend::FrontendParams frontend;
  std::vector<encoder::ConformerBlockParams> e1;  // M blocks
  std::vector<encoder::ConformerBlockParams> e2;  // N blocks
  ctc::CtcHead inter_head;
  ctc::CtcHead final_head;
  decoder::DecoderParams decoder;  // shared by both AED terms

  ParamList named_parameters();
};

struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double alpha = 0.3;
  double beta = 0.99;
  split::SplitMode mode = split::kDefaultMode;

  void validate() const;
};

struct ReductionStats {
  std::size_t input_frames = 0;       // T_in
  std::size_t subsampled_frames = 0;  // T
  std::size_t crucial = 0;
  std::size_t trivial = 0;
  std::size_t ignoring = 0;

  std::size_t output_frames() const { return crucial + trivial; }
  // T_in / |h2|
  double reduction_factor() const {
    return static_cast<double>(input_frames) / static_cast<double>(output_frames());
  }
};

struct ForwardOptions {
  // false runs every frame through both sub-encoders (no splitting).
  bool skip = true;
  // Compute the final CTC grid on h2. The intermediate grid is always
  // computed when skipping.
  bool final_head = true;
  // When set, the split is bypassed if h2 could not align this target.
  const ctc::TokenSequence* target = nullptr;
  // Overrides the thresholded intermediate posteriors (benchmarks, tests).
  const std::vector<bool>* forced_blank_flags = nullptr;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct ForwardTrace {
  encoder::EncodedSequence xs;
  encoder::EncodedSequence h1;
  encoder::EncodedSequence h1c;
  encoder::EncodedSequence h1t;
  encoder::EncodedSequence h2c;
  encoder::EncodedSequence h2;
  split::FrameGroups groups;
  ctc::PosteriorGrid inter_grid;  // empty Var when not computed
  ctc::PosteriorGrid final_grid;
  ReductionStats stats;
  bool fallback = false;  // split bypassed, every frame crucial
  std::uint64_t attention_score_macs = 0;
};

// Merges the two subsequences by orig_index. Rows are copied verbatim.
encoder::EncodedSequence recover(const encoder::EncodedSequence& h2c,
                                 const encoder::EncodedSequence& h1t);

ForwardTrace forward(const frontend::FeatureSequence& x, const SkipformerParams& p,
                     const LossWeights& w, const ForwardOptions& opts = {});

struct LossComponents {
  double ctc_inter = 0.0;
  double ctc_final = 0.0;
  double aed_inter = 0.0;
  double aed_final = 0.0;
};

// alpha (l1 ctc_inter + l2 ctc_final) + (1 - alpha)(l1 aed_inter + l2 aed_final)
num::Var combine_losses(const num::Var& ctc_inter, const num::Var& ctc_final,
                        const num::Var& aed_inter, const num::Var& aed_final,
                        const LossWeights& w);
double combine_losses(const LossComponents& c, const LossWeights& w);

struct LossResult {
  num::Var total;
  LossComponents components;
};

LossResult total_loss(const ForwardTrace& trace, const ctc::TokenSequence& y,
                      const SkipformerParams& p, const LossWeights& w);

// Config scalars, parameters and Adam moments as named tensors.
std::vector<num::NamedTensor> export_tensors(SkipformerParams& p);
// Rebuilds a model; tensors outside the model namespace are ignored.
SkipformerParams import_tensors(const std::vector<num::NamedTensor>& tensors);

}  // namespace skf::model
