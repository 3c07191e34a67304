#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "skipformer/ctc.hpp"
#include "skipformer/frontend.hpp"

namespace skf::harness {

// Parameters of the synthetic stand-in for speech. Each token owns a fixed
// random feature prototype; an utterance is a run of frames per token,
// separated (and surrounded) by gaps of "silence" frames.
struct SyntheticSpec {
  std::size_t vocab_size = 20;  // CTC vocabulary, tokens are 1..vocab_size-1
  std::size_t utterances = 200;
  std::size_t tokens_min = 3;
  std::size_t tokens_max = 6;
  std::size_t frames_per_token_min = 8;
  std::size_t frames_per_token_max = 12;
  std::size_t gap_min = 16;
  std::size_t gap_max = 28;
  std::size_t feature_dim = 16;
  double noise = 0.3;
  std::uint64_t seed = 1;
  // Selects an independent utterance stream over the same prototypes, so
  // train and held-out sets share the token inventory.
  std::uint64_t stream = 0;

  void validate() const;
};

struct Transcript {
  std::string utterance_id;
  ctc::TokenSequence tokens;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

struct Corpus {
  std::vector<frontend::FeatureSequence> features;
  std::vector<Transcript> transcripts;

  std::size_t size() const { return features.size(); }
  // Fraction of input frames that belong to silence gaps; only known for
  // generated corpora, negative otherwise.
  double gap_fraction = -1.0;
};

Corpus generate_corpus(const SyntheticSpec& spec);

// utterance_id<TAB>space separated token ids, one utterance per line.
void save_transcripts(const std::filesystem::path& path, const std::vector<Transcript>& t);
std::vector<Transcript> load_transcripts(const std::filesystem::path& path);

void save_corpus(const Corpus& c, const std::filesystem::path& features,
                 const std::filesystem::path& transcripts);
// Features and transcripts must list the same utterances in the same order.
Corpus load_corpus(const std::filesystem::path& features, const std::filesystem::path& transcripts);

}  // namespace skf::harness
