#include "skipformer/decoder.hpp"

#include <cmath>

#include "skipformer/errors.hpp"

namespace skf::decoder {

using num::Array;
using num::Shape;
using num::Var;

DecoderBlockParams::DecoderBlockParams(std::size_t d, std::size_t heads, std::size_t ffn,
                                       std::mt19937_64& rng)
    : self_norm(d),
      self_attention(d, heads, rng),
      cross_norm(d),
      cross_attention(d, heads, rng),
      ffn_norm(d),
      ffn_in(d, ffn, rng),
      ffn_out(ffn, d, rng) {}

void DecoderBlockParams::collect(ParamList& out, const std::string& prefix) {
  self_norm.collect(out, prefix + ".self.norm");
  self_attention.collect(out, prefix + ".self");
  cross_norm.collect(out, prefix + ".cross.norm");
  cross_attention.collect(out, prefix + ".cross");
  ffn_norm.collect(out, prefix + ".ffn.norm");
  ffn_in.collect(out, prefix + ".ffn.in");
  ffn_out.collect(out, prefix + ".ffn.out");
}

DecoderParams::DecoderParams(std::size_t ctc_vocab_, std::size_t d, std::size_t heads,
                             std::size_t ffn, std::size_t depth, std::mt19937_64& rng)
    : ctc_vocab(ctc_vocab_),
      embedding(random_normal(Shape{ctc_vocab_ + 2, d}, 1.0, rng)),
      final_norm(d),
      output(d, ctc_vocab_ + 2, rng) {
  blocks.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) blocks.emplace_back(d, heads, ffn, rng);
}

void DecoderParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".embedding", &embedding});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(out, prefix + ".block" + std::to_string(i));
  }
  final_norm.collect(out, prefix + ".final_norm");
  output.collect(out, prefix + ".output");
}

Var decoder_logits(const encoder::EncodedSequence& enc, std::span<const std::size_t> inputs,
                   const DecoderParams& p) {
  if (enc.length() == 0) throw ContractError("decoder over an empty encoder output");
  if (inputs.empty()) throw ContractError("decoder needs at least one input token");
  for (std::size_t tok : inputs) {
    if (tok >= p.output_vocab()) {
      throw ContractError("decoder input token " + std::to_string(tok) + " out of range");
    }
  }
  const std::size_t d = p.embedding.shape()[1];
  Var x = num::gather_rows(p.embedding.value, inputs);
  x = x + Var(sinusoidal_encoding(inputs.size(), d));

  AttentionCall self_call;
  self_call.mask.causal = true;
  AttentionCall cross_call;
  cross_call.mask.key_length = enc.length();
  for (const auto& b : p.blocks) {
    const Var s = b.self_norm(x);
    x = x + b.self_attention(s, s, self_call);
    x = x + b.cross_attention(b.cross_norm(x), enc.frames, cross_call);
    x = x + b.ffn_out(num::swish(b.ffn_in(b.ffn_norm(x))));
  }
  return p.output(p.final_norm(x));
}

namespace {

std::vector<std::size_t> teacher_inputs(const ctc::TokenSequence& y, const DecoderParams& p) {
  std::vector<std::size_t> in;
  in.reserve(y.size() + 1);
  in.push_back(p.sos());
  in.insert(in.end(), y.begin(), y.end());
  return in;
}

std::vector<std::size_t> teacher_targets(const ctc::TokenSequence& y, const DecoderParams& p) {
  std::vector<std::size_t> out(y.begin(), y.end());
  out.push_back(p.eos());
  return out;
}

}  // namespace

Var aed_loss(const encoder::EncodedSequence& enc, const ctc::TokenSequence& y,
             const DecoderParams& p) {
  if (y.empty()) throw ContractError("aed_loss needs a non-empty target");
  ctc::validate_tokens(y, p.ctc_vocab);
  const Var logits = decoder_logits(enc, teacher_inputs(y, p), p);
  return num::cross_entropy(logits, teacher_targets(y, p));
}

double sequence_log_likelihood(const encoder::EncodedSequence& enc, const ctc::TokenSequence& y,
                               const DecoderParams& p) {
  ctc::validate_tokens(y, p.ctc_vocab);
  const Var logp = num::log_softmax_rows(decoder_logits(enc, teacher_inputs(y, p), p));
  const auto targets = teacher_targets(y, p);
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) total += logp.value()(i, targets[i]);
  return total;
}

RescoreResult rescore_scores(const encoder::EncodedSequence& enc,
                             const std::vector<ctc::Hypothesis>& hyps, const DecoderParams& p,
                             double ctc_weight) {
  if (hyps.empty()) throw ContractError("rescore needs at least one hypothesis");
  RescoreResult r;
  r.scores.reserve(hyps.size());
  for (const auto& h : hyps) {
    r.scores.push_back(sequence_log_likelihood(enc, h.tokens, p) + ctc_weight * h.log_score);
  }
  for (std::size_t i = 1; i < r.scores.size(); ++i) {
    if (r.scores[i] > r.scores[r.best]) r.best = i;
  }
  return r;
}

ctc::TokenSequence rescore(const encoder::EncodedSequence& enc,
                           const std::vector<ctc::Hypothesis>& hyps, const DecoderParams& p,
                           double ctc_weight) {
  if (hyps.size() == 1) return hyps.front().tokens;
  return hyps[rescore_scores(enc, hyps, p, ctc_weight).best].tokens;
}

}  // namespace skf::decoder
