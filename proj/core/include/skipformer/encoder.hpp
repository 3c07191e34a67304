#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "skipformer/layers.hpp"

namespace skf::encoder {

// Framewise embeddings tagged with their subsampled-time positions.
struct EncodedSequence {
  num::Var frames;                     // (L, D_model)
  std::vector<std::size_t> orig_index; // strictly increasing, size L

  std::size_t length() const { return orig_index.size(); }
};

// Builds an EncodedSequence with orig_index 0..L-1.
EncodedSequence with_identity_index(num::Var frames);

struct EncoderConfig {
  std::size_t M = 2;  // blocks before the split
  std::size_t N = 2;  // blocks after the split
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t k1 = 15;  // depthwise kernel for the first sub-encoder
  std::size_t k2 = 5;   // depthwise kernel for the second sub-encoder
  double dropout = 0.0;

  void validate() const;

  // Full-scale layouts: 5/7 blocks with kernels 15/5, and 6/6 with 31/9.
  static EncoderConfig aishell_preset();
  static EncoderConfig librispeech_preset();
};

struct ConformerBlockParams {
  ConformerBlockParams() = default;
  ConformerBlockParams(std::size_t d_model, std::size_t heads, std::size_t ffn_dim,
                       std::size_t kernel, std::mt19937_64& rng);

  // All residual branches emit zero and the final norm is bypassed, so the
  // block is an exact identity map.
  static ConformerBlockParams residual_identity(std::size_t d_model, std::size_t heads,
                                                std::size_t ffn_dim, std::size_t kernel);

  LayerNorm ffn1_norm;
  Linear ffn1_in;
  Linear ffn1_out;
  LayerNorm attention_norm;
  MultiHeadAttention attention;
  LayerNorm conv_norm;
  Linear pointwise1;  // D -> 2D, followed by GLU
  num::Parameter depthwise_weight;  // (K, D)
  num::Parameter depthwise_bias;    // (D)
  LayerNorm depthwise_norm;
  Linear pointwise2;
  LayerNorm ffn2_norm;
  Linear ffn2_in;
  Linear ffn2_out;
  LayerNorm final_norm;
  bool use_final_norm = true;

  std::size_t kernel() const { return depthwise_weight.shape().at(0); }
  void collect(ParamList& out, const std::string& prefix);
};

struct BlockOptions {
  // Rows at index >= valid_length are right padding.
  std::size_t valid_length = SIZE_MAX;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;  // required when dropout > 0
  AttentionCounter* counter = nullptr;
  std::vector<num::Array>* attention_probabilities = nullptr;
};

// Macaron block: x + FFN/2, + MHSA, + conv module, + FFN/2, then layer norm.
EncodedSequence conformer_block(const EncodedSequence& x, const ConformerBlockParams& p,
                                const BlockOptions& opts = {});

EncodedSequence run_encoder(const EncodedSequence& x,
                            std::span<const ConformerBlockParams> blocks,
                            const BlockOptions& opts = {});

}  // namespace skf::encoder
