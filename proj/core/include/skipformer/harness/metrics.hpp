#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skipformer/ctc.hpp"
#include "skipformer/skipmodel.hpp"

namespace skf::harness {

// Levenshtein distance with unit costs.
std::size_t edit_distance(const ctc::TokenSequence& hyp, const ctc::TokenSequence& ref);

struct ErrorCounter {
  std::size_t edits = 0;
  std::size_t reference_tokens = 0;

  void add(const ctc::TokenSequence& hyp, const ctc::TokenSequence& ref);
  // edits / reference tokens; 0 for an empty reference set.
  double rate() const;
};

// Per-utterance frame accounting, enough to recompute the reduction factor.
struct TraceRecord {
  std::string utterance_id;
  std::size_t input_frames = 0;
  std::size_t subsampled_frames = 0;
  std::size_t crucial = 0;
  std::size_t trivial = 0;
  std::size_t ignoring = 0;
  bool fallback = false;
  double reduction_factor = 0.0;
};

TraceRecord make_trace(const std::string& id, const model::ForwardTrace& t);
nlohmann::json to_json(const TraceRecord& r);
TraceRecord trace_from_json(const nlohmann::json& j);
void save_traces(const std::filesystem::path& path, const std::vector<TraceRecord>& traces);
std::vector<TraceRecord> load_traces(const std::filesystem::path& path);

// One JSON object per line. Appends; the file is created on first write.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path, bool truncate = false);
  void write(const nlohmann::json& record);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace skf::harness
