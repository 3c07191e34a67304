#include "skipformer/harness/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "skipformer/errors.hpp"

namespace skf::harness {

using num::Array;
using num::Shape;

void SyntheticSpec::validate() const {
  if (vocab_size < 2) throw ConfigError("synthetic vocab_size must be at least 2");
  if (tokens_min < 1 || tokens_min > tokens_max) throw ConfigError("bad token count range");
  if (frames_per_token_min < 1 || frames_per_token_min > frames_per_token_max) {
    throw ConfigError("bad frames-per-token range");
  }
  if (gap_min > gap_max) throw ConfigError("bad gap range");
  if (feature_dim < frontend::kMinInputFrames) {
    throw ConfigError("synthetic feature_dim must be at least " +
                      std::to_string(frontend::kMinInputFrames));
  }
  if (noise < 0.0) throw ConfigError("noise must be non-negative");
}

Corpus generate_corpus(const SyntheticSpec& spec) {
  spec.validate();
  // Row 0 is the silence prototype, row k the prototype of token k.
  std::mt19937_64 proto_rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Array prototypes(Shape{spec.vocab_size, spec.feature_dim});
  for (double& v : prototypes.values()) v = unit(proto_rng);

  std::seed_seq seq{spec.seed, spec.stream, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::normal_distribution<double> noise(0.0, 1.0);

  Corpus c;
  std::size_t gap_frames = 0;
  std::size_t all_frames = 0;
  for (std::size_t u = 0; u < spec.utterances; ++u) {
    const std::size_t n_tokens = uniform(spec.tokens_min, spec.tokens_max);
    Transcript tr;
    char id[32];
    std::snprintf(id, sizeof id, "s%llu-u%05zu", static_cast<unsigned long long>(spec.stream), u);
    tr.utterance_id = id;
    std::vector<std::size_t> frame_sources;  // prototype row per frame
    auto emit = [&](std::size_t proto, std::size_t count) {
      frame_sources.insert(frame_sources.end(), count, proto);
    };
    for (std::size_t k = 0; k < n_tokens; ++k) {
      const std::size_t g = uniform(spec.gap_min, spec.gap_max);
      emit(0, g);
      gap_frames += g;
      const std::size_t tok = uniform(1, spec.vocab_size - 1);
      tr.tokens.push_back(tok);
      emit(tok, uniform(spec.frames_per_token_min, spec.frames_per_token_max));
    }
    const std::size_t tail = uniform(spec.gap_min, spec.gap_max);
    emit(0, tail);
    gap_frames += tail;
    // Keep the utterance long enough for the subsampler.
    if (frame_sources.size() < frontend::kMinInputFrames) {
      const std::size_t pad = frontend::kMinInputFrames - frame_sources.size();
      emit(0, pad);
      gap_frames += pad;
    }
    all_frames += frame_sources.size();

    Array frames(Shape{frame_sources.size(), spec.feature_dim});
    for (std::size_t t = 0; t < frame_sources.size(); ++t) {
      for (std::size_t f = 0; f < spec.feature_dim; ++f) {
        const double v = prototypes(frame_sources[t], f) +
                         (spec.noise > 0.0 ? spec.noise * noise(rng) : 0.0);
        // Stored as f32 on disk; round now so memory and file agree.
        frames(t, f) = static_cast<double>(static_cast<float>(v));
      }
    }
    c.features.push_back(frontend::FeatureSequence{tr.utterance_id, std::move(frames)});
    c.transcripts.push_back(std::move(tr));
  }
  c.gap_fraction =
      all_frames ? static_cast<double>(gap_frames) / static_cast<double>(all_frames) : 0.0;
  return c;
}

void save_transcripts(const std::filesystem::path& path, const std::vector<Transcript>& ts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& t : ts) {
    out << t.utterance_id << '\t';
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      if (i) out << ' ';
      out << t.tokens[i];
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<Transcript> load_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Transcript> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": missing tab");
    }
    Transcript t;
    t.utterance_id = line.substr(0, tab);
    std::istringstream tokens(line.substr(tab + 1));
    long long tok = 0;
    while (tokens >> tok) {
      if (tok <= 0) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                          ": token ids must be positive");
      }
      t.tokens.push_back(static_cast<std::size_t>(tok));
    }
    if (!tokens.eof()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": malformed token list");
    }
    out.push_back(std::move(t));
  }
  return out;
}

void save_corpus(const Corpus& c, const std::filesystem::path& features,
                 const std::filesystem::path& transcripts) {
  frontend::save_features(features, c.features);
  save_transcripts(transcripts, c.transcripts);
}

Corpus load_corpus(const std::filesystem::path& features,
                   const std::filesystem::path& transcripts) {
  Corpus c;
  c.features = frontend::load_features(features);
  c.transcripts = load_transcripts(transcripts);
  if (c.features.size() != c.transcripts.size()) {
    throw ConfigError("corpus mismatch: " + std::to_string(c.features.size()) +
                      " feature sequences vs " + std::to_string(c.transcripts.size()) +
                      " transcripts");
  }
  for (std::size_t i = 0; i < c.features.size(); ++i) {
    if (c.features[i].utterance_id != c.transcripts[i].utterance_id) {
      throw ConfigError("corpus mismatch at entry " + std::to_string(i) + ": '" +
                        c.features[i].utterance_id + "' vs '" +
                        c.transcripts[i].utterance_id + "'");
    }
  }
  return c;
}

}  // namespace skf::harness
