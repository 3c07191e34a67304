#include "skipformer/harness/config.hpp"

#include <fstream>
#include <set>

#include "skipformer/errors.hpp"

namespace skf::harness {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, remembering which were consumed so the
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError(label() + " must be an object");
    obj_ = &j;
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_->find(key);
    if (it == obj_->end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(label() + "." + key + ": " + e.what());
    }
  }

  void read_count(const char* key, std::size_t& out) {
    seen_.insert(key);
    auto it = obj_->find(key);
    if (it == obj_->end()) return;
    if (!it->is_number_unsigned()) {
      throw ConfigError(label() + "." + key + " must be a non-negative integer");
    }
    out = it->get<std::size_t>();
  }

  void read_path(const char* key, std::filesystem::path& out) {
    std::string s;
    read(key, s);
    if (obj_->contains(key)) out = s;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  void reject_unknown() const {
    for (auto it = obj_->begin(); it != obj_->end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key " + label() + "." + it.key());
    }
  }

 private:
  std::string label() const { return name_.empty() ? "<root>" : name_; }

  const json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

DecodeMethod decode_method_from_string(const std::string& s) {
  if (s == "greedy") return DecodeMethod::kGreedy;
  if (s == "rescoring") return DecodeMethod::kRescoring;
  throw ConfigError("decode method must be 'greedy' or 'rescoring', got '" + s + "'");
}

std::string to_string(DecodeMethod m) {
  return m == DecodeMethod::kGreedy ? "greedy" : "rescoring";
}

void RunConfig::validate() const {
  try {
    model.validate();
    loss.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
  if (optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 || optimizer.beta2 < 0.0 ||
      optimizer.beta2 >= 1.0) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw ConfigError("optimizer.eps must be positive");
  if (optimizer.grad_clip < 0.0) throw ConfigError("optimizer.grad_clip must be non-negative");
  if (training.batch_size == 0) throw ConfigError("training.batch_size must be positive");
  if (decode.beam == 0) throw ConfigError("decode.beam must be positive");
  if (model.encoder.dropout < 0.0 || model.encoder.dropout >= 1.0) {
    throw ConfigError("model.dropout must lie in [0, 1)");
  }
  synthetic.validate();
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");

  if (const json* m = root.child("model")) {
    Section s(*m, "model");
    auto& e = c.model.encoder;
    s.read_count("feature_dim", c.model.feature_dim);
    s.read_count("vocab_size", c.model.vocab_size);
    s.read_count("decoder_depth", c.model.decoder_depth);
    s.read_count("M", e.M);
    s.read_count("N", e.N);
    s.read_count("d_model", e.d_model);
    s.read_count("heads", e.heads);
    s.read_count("ffn_dim", e.ffn_dim);
    s.read_count("k1", e.k1);
    s.read_count("k2", e.k2);
    s.read("dropout", e.dropout);
    s.reject_unknown();
  }
  if (const json* l = root.child("loss")) {
    Section s(*l, "loss");
    s.read("lambda1", c.loss.lambda1);
    s.read("lambda2", c.loss.lambda2);
    s.read("alpha", c.loss.alpha);
    s.read("beta", c.loss.beta);
    int mode = split::mode_number(c.loss.mode);
    s.read("mode", mode);
    try {
      c.loss.mode = split::mode_from_int(mode);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("loss.mode: ") + e.what());
    }
    s.reject_unknown();
  }
  if (const json* o = root.child("optimizer")) {
    Section s(*o, "optimizer");
    s.read("lr", c.optimizer.lr);
    s.read_count("warmup_steps", c.optimizer.warmup_steps);
    s.read("beta1", c.optimizer.beta1);
    s.read("beta2", c.optimizer.beta2);
    s.read("eps", c.optimizer.eps);
    s.read("grad_clip", c.optimizer.grad_clip);
    s.reject_unknown();
  }
  if (const json* t = root.child("training")) {
    Section s(*t, "training");
    s.read_count("epochs", c.training.epochs);
    s.read_count("batch_size", c.training.batch_size);
    s.read_count("eval_every", c.training.eval_every);
    s.read("seed", c.training.seed);
    s.reject_unknown();
  }
  if (const json* d = root.child("decode")) {
    Section s(*d, "decode");
    std::string method = to_string(c.decode.method);
    s.read("method", method);
    c.decode.method = decode_method_from_string(method);
    s.read_count("beam", c.decode.beam);
    s.read("ctc_weight", c.decode.ctc_weight);
    s.reject_unknown();
  }
  if (const json* d = root.child("data")) {
    Section s(*d, "data");
    s.read_path("train_features", c.data.train_features);
    s.read_path("train_transcripts", c.data.train_transcripts);
    s.read_path("dev_features", c.data.dev_features);
    s.read_path("dev_transcripts", c.data.dev_transcripts);
    s.reject_unknown();
  }
  if (const json* y = root.child("synthetic")) {
    Section s(*y, "synthetic");
    auto& g = c.synthetic;
    s.read_count("vocab_size", g.vocab_size);
    s.read_count("utterances", g.utterances);
    s.read_count("tokens_min", g.tokens_min);
    s.read_count("tokens_max", g.tokens_max);
    s.read_count("frames_per_token_min", g.frames_per_token_min);
    s.read_count("frames_per_token_max", g.frames_per_token_max);
    s.read_count("gap_min", g.gap_min);
    s.read_count("gap_max", g.gap_max);
    s.read_count("feature_dim", g.feature_dim);
    s.read("noise", g.noise);
    s.read("seed", g.seed);
    s.read("stream", g.stream);
    s.reject_unknown();
  }
  root.read_path("out_dir", c.out_dir);
  root.reject_unknown();
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  const auto& e = c.model.encoder;
  const auto& g = c.synthetic;
  return json{
      {"model",
       {{"feature_dim", c.model.feature_dim},
        {"vocab_size", c.model.vocab_size},
        {"decoder_depth", c.model.decoder_depth},
        {"M", e.M},
        {"N", e.N},
        {"d_model", e.d_model},
        {"heads", e.heads},
        {"ffn_dim", e.ffn_dim},
        {"k1", e.k1},
        {"k2", e.k2},
        {"dropout", e.dropout}}},
      {"loss",
       {{"lambda1", c.loss.lambda1},
        {"lambda2", c.loss.lambda2},
        {"alpha", c.loss.alpha},
        {"beta", c.loss.beta},
        {"mode", split::mode_number(c.loss.mode)}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"warmup_steps", c.optimizer.warmup_steps},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"grad_clip", c.optimizer.grad_clip}}},
      {"training",
       {{"epochs", c.training.epochs},
        {"batch_size", c.training.batch_size},
        {"eval_every", c.training.eval_every},
        {"seed", c.training.seed}}},
      {"decode",
       {{"method", to_string(c.decode.method)},
        {"beam", c.decode.beam},
        {"ctc_weight", c.decode.ctc_weight}}},
      {"data",
       {{"train_features", c.data.train_features.string()},
        {"train_transcripts", c.data.train_transcripts.string()},
        {"dev_features", c.data.dev_features.string()},
        {"dev_transcripts", c.data.dev_transcripts.string()}}},
      {"synthetic",
       {{"vocab_size", g.vocab_size},
        {"utterances", g.utterances},
        {"tokens_min", g.tokens_min},
        {"tokens_max", g.tokens_max},
        {"frames_per_token_min", g.frames_per_token_min},
        {"frames_per_token_max", g.frames_per_token_max},
        {"gap_min", g.gap_min},
        {"gap_max", g.gap_max},
        {"feature_dim", g.feature_dim},
        {"noise", g.noise},
        {"seed", g.seed},
        {"stream", g.stream}}},
      {"out_dir", c.out_dir.string()},
  };
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c = config_from_json(j);
  // Relative paths are taken relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&c.data.train_features, &c.data.train_transcripts, &c.data.dev_features,
                  &c.data.dev_transcripts, &c.out_dir}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return c;
}

}  // namespace skf::harness
