#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "skipformer/layers.hpp"

namespace skf::frontend {

// Raw framewise features, (T_in, F).
struct FeatureSequence {
  std::string utterance_id;
  num::Array frames;

  std::size_t length() const { return frames.rows(); }
  std::size_t feature_dim() const { return frames.cols(); }
};

struct SubsampledSequence {
  num::Var frames;                    // (T, D_model)
  std::vector<std::size_t> time_map;  // first input frame covered by each output frame
};

// Two 3x3 stride-2 valid convolutions need at least this many frames (and
// feature bins).
inline constexpr std::size_t kMinInputFrames = 7;

// Output length of the two-stage subsampler: floor((floor((t_in-1)/2)-1)/2).
// Throws InputTooShortError below kMinInputFrames.
std::size_t subsampled_length(std::size_t t_in);

struct FrontendParams {
  FrontendParams() = default;
  FrontendParams(std::size_t feature_dim, std::size_t d_model, std::mt19937_64& rng);

  std::size_t feature_dim = 0;
  std::size_t d_model = 0;
  num::Parameter conv1_weight;  // (9, D)
  num::Parameter conv1_bias;    // (D)
  num::Parameter conv2_weight;  // (9 * D, D)
  num::Parameter conv2_bias;    // (D)
  Linear projection;            // (D * F'', D)

  void collect(ParamList& out, const std::string& prefix);
};

// conv(3x3, s2) -> swish -> conv(3x3, s2) -> swish -> flatten(freq, chan) -> linear.
SubsampledSequence subsample(const FeatureSequence& x, const FrontendParams& p);

// Feature file (little-endian):
//   "SKPF-FEAT" u32 version u32 utterance_count
//   per utterance: u32 id_len, id bytes, u32 T_in, u32 F, T_in*F f32 row-major
inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_features(const std::vector<FeatureSequence>& seqs);
std::vector<FeatureSequence> decode_features(const std::vector<std::uint8_t>& bytes);
void save_features(const std::filesystem::path& path, const std::vector<FeatureSequence>& seqs);
std::vector<FeatureSequence> load_features(const std::filesystem::path& path);

}  // namespace skf::frontend
