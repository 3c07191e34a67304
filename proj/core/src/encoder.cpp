#include "skipformer/encoder.hpp"

#include <cmath>

#include "skipformer/errors.hpp"

namespace skf::encoder {

using num::Array;
using num::Shape;
using num::Var;

EncodedSequence with_identity_index(Var frames) {
  EncodedSequence s;
  s.orig_index.resize(frames.rows());
  for (std::size_t i = 0; i < s.orig_index.size(); ++i) s.orig_index[i] = i;
  s.frames = std::move(frames);
  return s;
}

void EncoderConfig::validate() const {
  if (M < 1 || N < 1) throw ParameterError("encoder needs M >= 1 and N >= 1");
  if (heads == 0 || d_model % heads != 0) {
    throw ParameterError("d_model " + std::to_string(d_model) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  if (k1 % 2 == 0 || k2 % 2 == 0) throw ParameterError("conv kernel sizes must be odd");
  if (ffn_dim == 0) throw ParameterError("ffn_dim must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ParameterError("dropout must lie in [0, 1)");
}

EncoderConfig EncoderConfig::aishell_preset() {
  EncoderConfig c;
  c.M = 5;
  c.N = 7;
  c.d_model = 256;
  c.heads = 4;
  c.ffn_dim = 2048;
  c.k1 = 15;
  c.k2 = 5;
  return c;
}

EncoderConfig EncoderConfig::librispeech_preset() {
  EncoderConfig c = aishell_preset();
  c.M = 6;
  c.N = 6;
  c.k1 = 31;
  c.k2 = 9;
  return c;
}

ConformerBlockParams::ConformerBlockParams(std::size_t d, std::size_t heads, std::size_t ffn,
                                           std::size_t kernel, std::mt19937_64& rng)
    : ffn1_norm(d),
      ffn1_in(d, ffn, rng),
      ffn1_out(ffn, d, rng),
      attention_norm(d),
      attention(d, heads, rng),
      conv_norm(d),
      pointwise1(d, 2 * d, rng),
      depthwise_weight(random_normal(Shape{kernel, d},
                                     1.0 / std::sqrt(static_cast<double>(kernel)), rng)),
      depthwise_bias(Array(Shape{d}, 0.0)),
      depthwise_norm(d),
      pointwise2(d, d, rng),
      ffn2_norm(d),
      ffn2_in(d, ffn, rng),
      ffn2_out(ffn, d, rng),
      final_norm(d) {
  if (kernel % 2 == 0) throw ParameterError("depthwise kernel must be odd");
}

ConformerBlockParams ConformerBlockParams::residual_identity(std::size_t d, std::size_t heads,
                                                             std::size_t ffn,
                                                             std::size_t kernel) {
  std::mt19937_64 rng(0);
  ConformerBlockParams p(d, heads, ffn, kernel, rng);
  p.ffn1_out.zero_out();
  p.attention.output.zero_out();
  p.pointwise2.zero_out();
  p.ffn2_out.zero_out();
  p.use_final_norm = false;
  return p;
}

void ConformerBlockParams::collect(ParamList& out, const std::string& prefix) {
  ffn1_norm.collect(out, prefix + ".ffn1.norm");
  ffn1_in.collect(out, prefix + ".ffn1.in");
  ffn1_out.collect(out, prefix + ".ffn1.out");
  attention_norm.collect(out, prefix + ".attention.norm");
  attention.collect(out, prefix + ".attention");
  conv_norm.collect(out, prefix + ".conv.norm");
  pointwise1.collect(out, prefix + ".conv.pointwise1");
  out.push_back({prefix + ".conv.depthwise.weight", &depthwise_weight});
  out.push_back({prefix + ".conv.depthwise.bias", &depthwise_bias});
  depthwise_norm.collect(out, prefix + ".conv.depthwise_norm");
  pointwise2.collect(out, prefix + ".conv.pointwise2");
  ffn2_norm.collect(out, prefix + ".ffn2.norm");
  ffn2_in.collect(out, prefix + ".ffn2.in");
  ffn2_out.collect(out, prefix + ".ffn2.out");
  final_norm.collect(out, prefix + ".final_norm");
}

namespace {

Var maybe_dropout(const Var& x, const BlockOptions& opts) {
  if (opts.dropout <= 0.0) return x;
  if (!opts.rng) throw ContractError("dropout requested without a random generator");
  return num::dropout(x, opts.dropout, *opts.rng);
}

Var feed_forward(const Var& x, const LayerNorm& norm, const Linear& in, const Linear& out,
                 const BlockOptions& opts) {
  return out(maybe_dropout(num::swish(in(norm(x))), opts));
}

}  // namespace

EncodedSequence conformer_block(const EncodedSequence& x, const ConformerBlockParams& p,
                                const BlockOptions& opts) {
  if (x.length() == 0) throw ContractError("conformer_block on an empty sequence");
  if (x.frames.rows() != x.length()) {
    throw DimensionError("conformer_block: " + std::to_string(x.frames.rows()) +
                         " frames but " + std::to_string(x.length()) + " indices");
  }
  const std::size_t valid = std::min(opts.valid_length, x.length());

  Var h = x.frames;
  h = h + num::scale(maybe_dropout(feed_forward(h, p.ffn1_norm, p.ffn1_in, p.ffn1_out, opts),
                                   opts),
                     0.5);

  AttentionCall call;
  call.mask.key_length = valid;
  call.counter = opts.counter;
  call.probabilities = opts.attention_probabilities;
  const Var normed = p.attention_norm(h);
  h = h + maybe_dropout(p.attention(normed, normed, call), opts);

  Var c = num::glu(p.pointwise1(p.conv_norm(h)));
  c = num::depthwise_conv1d(c, p.depthwise_weight.value, p.depthwise_bias.value, valid);
  c = p.pointwise2(num::swish(p.depthwise_norm(c)));
  h = h + maybe_dropout(c, opts);

  h = h + num::scale(maybe_dropout(feed_forward(h, p.ffn2_norm, p.ffn2_in, p.ffn2_out, opts),
                                   opts),
                     0.5);
  if (p.use_final_norm) h = p.final_norm(h);
  return EncodedSequence{h, x.orig_index};
}

EncodedSequence run_encoder(const EncodedSequence& x, std::span<const ConformerBlockParams> blocks,
                            const BlockOptions& opts) {
  if (blocks.empty()) throw ContractError("run_encoder with no blocks");
  EncodedSequence h = x;
  for (const auto& b : blocks) h = conformer_block(h, b, opts);
  return h;
}

}  // namespace skf::encoder
