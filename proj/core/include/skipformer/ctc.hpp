#pragma once

#include <random>
#include <string>
#include <vector>

#include "skipformer/encoder.hpp"
#include "skipformer/layers.hpp"

namespace skf::ctc {

inline constexpr std::size_t kBlank = 0;

// Label sequence without blanks; every entry lies in [1, V).
using TokenSequence = std::vector<std::size_t>;

// Framewise log-softmax over the CTC vocabulary, (L, V). Column 0 is blank.
struct PosteriorGrid {
  num::Var log_probs;

  std::size_t frames() const { return log_probs.rows(); }
  std::size_t vocab() const { return log_probs.cols(); }
  const num::Array& values() const { return log_probs.value(); }
};

// Wraps log-probabilities (e.g. from a test) into a grid; rows are not
// renormalised.
PosteriorGrid grid_from_log_probs(num::Array log_probs);

struct CtcHead {
  CtcHead() = default;
  CtcHead(std::size_t d_model, std::size_t vocab, std::mt19937_64& rng);

  Linear projection;

  std::size_t vocab() const { return projection.bias.shape().at(0); }
  void collect(ParamList& out, const std::string& prefix);
};

PosteriorGrid ctc_head(const encoder::EncodedSequence& h, const CtcHead& head);

// Fewest frames that can emit y: |y| plus one separating blank per adjacent
// repeated pair.
std::size_t min_frames(const TokenSequence& y);

// Throws ContractError unless every token lies in [1, vocab).
void validate_tokens(const TokenSequence& y, std::size_t vocab);

// -log sum over alignments, forward recursion in log space. Differentiable
// through the op tape. Throws InfeasibleAlignmentError when g is too short.
num::Var ctc_loss(const PosteriorGrid& g, const TokenSequence& y);

// Argmax per frame, collapse repeats, drop blanks.
TokenSequence greedy_decode(const PosteriorGrid& g);

struct Hypothesis {
  TokenSequence tokens;
  double log_score = 0.0;  // log total probability of the prefix

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

// At most `beam` hypotheses, scores non-increasing; equal scores are ordered
// lexicographically by token sequence.
std::vector<Hypothesis> prefix_beam_search(const PosteriorGrid& g, std::size_t beam);

// flag[t] = P(blank at t) > beta (strict).
std::vector<bool> blank_flags(const PosteriorGrid& g, double beta);

}  // namespace skf::ctc
