#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "skipformer/ctc.hpp"
#include "skipformer/encoder.hpp"
#include "skipformer/layers.hpp"

namespace skf::decoder {

struct DecoderBlockParams {
  DecoderBlockParams() = default;
  DecoderBlockParams(std::size_t d_model, std::size_t heads, std::size_t ffn_dim,
                     std::mt19937_64& rng);

  LayerNorm self_norm;
  MultiHeadAttention self_attention;
  LayerNorm cross_norm;
  MultiHeadAttention cross_attention;
  LayerNorm ffn_norm;
  Linear ffn_in;
  Linear ffn_out;

  void collect(ParamList& out, const std::string& prefix);
};

// Pre-norm transformer decoder over the CTC vocabulary extended by two
// reserved symbols: sos = V and eos = V + 1.
struct DecoderParams {
  DecoderParams() = default;
  DecoderParams(std::size_t ctc_vocab, std::size_t d_model, std::size_t heads,
                std::size_t ffn_dim, std::size_t depth, std::mt19937_64& rng);

  std::size_t ctc_vocab = 0;
  num::Parameter embedding;  // (V + 2, D)
  std::vector<DecoderBlockParams> blocks;
  LayerNorm final_norm;
  Linear output;  // D -> V + 2

  std::size_t sos() const { return ctc_vocab; }
  std::size_t eos() const { return ctc_vocab + 1; }
  std::size_t output_vocab() const { return ctc_vocab + 2; }
  void collect(ParamList& out, const std::string& prefix);
};

// Causal teacher-forced logits, one row per input token.
num::Var decoder_logits(const encoder::EncodedSequence& enc, std::span<const std::size_t> inputs,
                        const DecoderParams& p);

// Mean cross-entropy of [y..., eos] given [sos, y...].
num::Var aed_loss(const encoder::EncodedSequence& enc, const ctc::TokenSequence& y,
                  const DecoderParams& p);

// Sum of log-probabilities of y followed by eos.
double sequence_log_likelihood(const encoder::EncodedSequence& enc, const ctc::TokenSequence& y,
                               const DecoderParams& p);

struct RescoreResult {
  std::size_t best = 0;
  std::vector<double> scores;  // decoder log-likelihood + weight * ctc score
};

RescoreResult rescore_scores(const encoder::EncodedSequence& enc,
                             const std::vector<ctc::Hypothesis>& hyps, const DecoderParams& p,
                             double ctc_weight);

// Best hypothesis by combined score; ties resolve to the lower index.
ctc::TokenSequence rescore(const encoder::EncodedSequence& enc,
                           const std::vector<ctc::Hypothesis>& hyps, const DecoderParams& p,
                           double ctc_weight);

}  // namespace skf::decoder
