#include "skipformer/harness/metrics.hpp"

#include <algorithm>

#include "skipformer/errors.hpp"

namespace skf::harness {

using nlohmann::json;

std::size_t edit_distance(const ctc::TokenSequence& hyp, const ctc::TokenSequence& ref) {
  std::vector<std::size_t> prev(ref.size() + 1);
  std::vector<std::size_t> cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

void ErrorCounter::add(const ctc::TokenSequence& hyp, const ctc::TokenSequence& ref) {
  edits += edit_distance(hyp, ref);
  reference_tokens += ref.size();
}

double ErrorCounter::rate() const {
  return reference_tokens ? static_cast<double>(edits) / static_cast<double>(reference_tokens)
                          : 0.0;
}

TraceRecord make_trace(const std::string& id, const model::ForwardTrace& t) {
  TraceRecord r;
  r.utterance_id = id;
  r.input_frames = t.stats.input_frames;
  r.subsampled_frames = t.stats.subsampled_frames;
  r.crucial = t.stats.crucial;
  r.trivial = t.stats.trivial;
  r.ignoring = t.stats.ignoring;
  r.fallback = t.fallback;
  r.reduction_factor = t.stats.reduction_factor();
  return r;
}

json to_json(const TraceRecord& r) {
  return json{{"utterance_id", r.utterance_id}, {"T_in", r.input_frames},
              {"T", r.subsampled_frames},       {"crucial", r.crucial},
              {"trivial", r.trivial},           {"ignoring", r.ignoring},
              {"fallback", r.fallback},         {"reduction_factor", r.reduction_factor}};
}

TraceRecord trace_from_json(const json& j) {
  try {
    TraceRecord r;
    r.utterance_id = j.at("utterance_id").get<std::string>();
    r.input_frames = j.at("T_in").get<std::size_t>();
    r.subsampled_frames = j.at("T").get<std::size_t>();
    r.crucial = j.at("crucial").get<std::size_t>();
    r.trivial = j.at("trivial").get<std::size_t>();
    r.ignoring = j.at("ignoring").get<std::size_t>();
    r.fallback = j.at("fallback").get<bool>();
    r.reduction_factor = j.at("reduction_factor").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed trace record: ") + e.what());
  }
}

void save_traces(const std::filesystem::path& path, const std::vector<TraceRecord>& traces) {
  JsonlWriter w(path, true);
  for (const auto& t : traces) w.write(to_json(t));
}

std::vector<TraceRecord> load_traces(const std::filesystem::path& path) {
  std::vector<TraceRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(trace_from_json(j));
  return out;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, bool truncate)
    : path_(path), out_(path, truncate ? std::ios::trunc : std::ios::app) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
}

void JsonlWriter::write(const json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw Error("write failed for " + path_.string());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace skf::harness
