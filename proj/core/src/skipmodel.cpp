#include "skipformer/skipmodel.hpp"

#include <map>

#include "skipformer/errors.hpp"

namespace skf::model {

using encoder::EncodedSequence;
using num::Array;
using num::NamedTensor;
using num::Shape;
using num::Var;

void ModelConfig::validate() const {
  encoder.validate();
  if (feature_dim < frontend::kMinInputFrames) {
    throw ParameterError("feature_dim must be at least " +
                         std::to_string(frontend::kMinInputFrames));
  }
  if (vocab_size < 2) throw ParameterError("vocab_size must include blank and one token");
  if (decoder_depth < 1) throw ParameterError("decoder_depth must be at least 1");
}

SkipformerParams::SkipformerParams(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
  config.validate();
  std::mt19937_64 rng(seed);
  const auto& e = config.encoder;
  frontend = frontend::FrontendParams(config.feature_dim, e.d_model, rng);
  e1.reserve(e.M);
  for (std::size_t i = 0; i < e.M; ++i) e1.emplace_back(e.d_model, e.heads, e.ffn_dim, e.k1, rng);
  e2.reserve(e.N);
  for (std::size_t i = 0; i < e.N; ++i) e2.emplace_back(e.d_model, e.heads, e.ffn_dim, e.k2, rng);
  inter_head = ctc::CtcHead(e.d_model, config.vocab_size, rng);
  final_head = ctc::CtcHead(e.d_model, config.vocab_size, rng);
  decoder = decoder::DecoderParams(config.vocab_size, e.d_model, e.heads, e.ffn_dim,
                                   config.decoder_depth, rng);
}

ParamList SkipformerParams::named_parameters() {
  ParamList out;
  frontend.collect(out, "frontend");
  for (std::size_t i = 0; i < e1.size(); ++i) e1[i].collect(out, "e1.block" + std::to_string(i));
  for (std::size_t i = 0; i < e2.size(); ++i) e2[i].collect(out, "e2.block" + std::to_string(i));
  inter_head.collect(out, "inter_ctc");
  final_head.collect(out, "final_ctc");
  decoder.collect(out, "decoder");
  return out;
}

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ParameterError("loss lambdas must be non-negative");
  if (alpha < 0.0 || alpha > 1.0) throw ParameterError("alpha must lie in [0, 1]");
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("beta must lie in (0, 1)");
  split::mode_from_int(split::mode_number(mode));
}

EncodedSequence recover(const EncodedSequence& h2c, const EncodedSequence& h1t) {
  auto check_sorted = [](const EncodedSequence& s, const char* what) {
    for (std::size_t i = 1; i < s.orig_index.size(); ++i) {
      if (s.orig_index[i] <= s.orig_index[i - 1]) {
        throw ContractError(std::string("recover: ") + what + " orig_index not increasing");
      }
    }
  };
  check_sorted(h2c, "crucial");
  check_sorted(h1t, "trivial");
  if (h1t.length() == 0) return h2c;
  if (h2c.length() == 0) return h1t;

  // Positions into concat(h2c, h1t) in merged order.
  const std::size_t nc = h2c.length();
  std::vector<std::size_t> order;
  EncodedSequence out;
  order.reserve(nc + h1t.length());
  out.orig_index.reserve(nc + h1t.length());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < nc || j < h1t.length()) {
    const bool take_crucial =
        j == h1t.length() || (i < nc && h2c.orig_index[i] < h1t.orig_index[j]);
    if (i < nc && j < h1t.length() && h2c.orig_index[i] == h1t.orig_index[j]) {
      throw ContractError("recover: frame " + std::to_string(h2c.orig_index[i]) +
                          " present in both crucial and trivial groups");
    }
    if (take_crucial) {
      order.push_back(i);
      out.orig_index.push_back(h2c.orig_index[i++]);
    } else {
      order.push_back(nc + j);
      out.orig_index.push_back(h1t.orig_index[j++]);
    }
  }
  out.frames = num::gather_rows(num::concat_rows({h2c.frames, h1t.frames}), order);
  return out;
}

ForwardTrace forward(const frontend::FeatureSequence& x, const SkipformerParams& p,
                     const LossWeights& w, const ForwardOptions& opts) {
  ForwardTrace tr;
  AttentionCounter counter;
  encoder::BlockOptions block_opts;
  block_opts.counter = &counter;
  block_opts.dropout = opts.dropout;
  block_opts.rng = opts.rng;

  const frontend::SubsampledSequence sub = frontend::subsample(x, p.frontend);
  const std::size_t t = sub.frames.rows();
  const Var positioned = sub.frames + Var(sinusoidal_encoding(t, p.config.encoder.d_model));
  tr.xs = encoder::with_identity_index(positioned);
  tr.h1 = encoder::run_encoder(tr.xs, p.e1, block_opts);

  if (opts.skip) {
    tr.inter_grid = ctc::ctc_head(tr.h1, p.inter_head);
    std::vector<bool> flags;
    if (opts.forced_blank_flags) {
      if (opts.forced_blank_flags->size() != t) {
        throw DimensionError("forced blank flags cover " +
                             std::to_string(opts.forced_blank_flags->size()) +
                             " frames, sequence has " + std::to_string(t));
      }
      flags = *opts.forced_blank_flags;
    } else {
      flags = ctc::blank_flags(tr.inter_grid, w.beta);
    }
    tr.groups = split::assign_groups(split::compute_sets(flags), w.mode);
    const std::size_t kept = tr.groups.crucial.size() + tr.groups.trivial.size();
    if (tr.groups.crucial.empty() ||
        (opts.target && kept < ctc::min_frames(*opts.target))) {
      tr.fallback = true;
      split::IndexSets sets = tr.groups.sets;
      tr.groups = split::all_crucial(t);
      tr.groups.sets = std::move(sets);
    }
  } else {
    tr.groups = split::all_crucial(t);
  }

  split::SplitResult parts = split::split(tr.h1, tr.groups);
  tr.h1c = std::move(parts.crucial);
  tr.h1t = std::move(parts.trivial);
  tr.h2c = encoder::run_encoder(tr.h1c, p.e2, block_opts);
  tr.h2 = recover(tr.h2c, tr.h1t);
  if (opts.final_head) tr.final_grid = ctc::ctc_head(tr.h2, p.final_head);

  tr.stats.input_frames = x.length();
  tr.stats.subsampled_frames = t;
  tr.stats.crucial = tr.groups.crucial.size();
  tr.stats.trivial = tr.groups.trivial.size();
  tr.stats.ignoring = tr.groups.ignoring.size();
  tr.attention_score_macs = counter.score_macs;
  return tr;
}

Var combine_losses(const Var& ctc_inter, const Var& ctc_final, const Var& aed_inter,
                   const Var& aed_final, const LossWeights& w) {
  const Var ctc = num::scale(ctc_inter, w.lambda1) + num::scale(ctc_final, w.lambda2);
  const Var aed = num::scale(aed_inter, w.lambda1) + num::scale(aed_final, w.lambda2);
  return num::scale(ctc, w.alpha) + num::scale(aed, 1.0 - w.alpha);
}

double combine_losses(const LossComponents& c, const LossWeights& w) {
  return w.alpha * (w.lambda1 * c.ctc_inter + w.lambda2 * c.ctc_final) +
         (1.0 - w.alpha) * (w.lambda1 * c.aed_inter + w.lambda2 * c.aed_final);
}

LossResult total_loss(const ForwardTrace& trace, const ctc::TokenSequence& y,
                      const SkipformerParams& p, const LossWeights& w) {
  const ctc::PosteriorGrid inter =
      trace.inter_grid.log_probs ? trace.inter_grid : ctc::ctc_head(trace.h1, p.inter_head);
  const ctc::PosteriorGrid fin =
      trace.final_grid.log_probs ? trace.final_grid : ctc::ctc_head(trace.h2, p.final_head);
  const Var ci = ctc::ctc_loss(inter, y);
  const Var cf = ctc::ctc_loss(fin, y);
  const Var ai = decoder::aed_loss(trace.h1, y, p.decoder);
  const Var af = decoder::aed_loss(trace.h2, y, p.decoder);
  LossResult r;
  r.total = combine_losses(ci, cf, ai, af, w);
  r.components = {ci.item(), cf.item(), ai.item(), af.item()};
  return r;
}

namespace {

const char* const kConfigKeys[] = {"feature_dim", "vocab_size", "M",      "N",
                                   "d_model",     "heads",      "ffn_dim", "k1",
                                   "k2",          "decoder_depth"};

std::vector<double> config_values(const ModelConfig& c) {
  const auto& e = c.encoder;
  return {static_cast<double>(c.feature_dim), static_cast<double>(c.vocab_size),
          static_cast<double>(e.M),           static_cast<double>(e.N),
          static_cast<double>(e.d_model),     static_cast<double>(e.heads),
          static_cast<double>(e.ffn_dim),     static_cast<double>(e.k1),
          static_cast<double>(e.k2),          static_cast<double>(c.decoder_depth)};
}

}  // namespace

std::vector<NamedTensor> export_tensors(SkipformerParams& p) {
  std::vector<NamedTensor> out;
  const auto values = config_values(p.config);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({std::string("config.") + kConfigKeys[i], Array::scalar(values[i])});
  }
  ParamList params = p.named_parameters();
  std::uint64_t step = 0;
  for (const auto& np : params) {
    out.push_back({"param." + np.name, np.param->value.value()});
    step = std::max(step, np.param->step_count);
  }
  for (const auto& np : params) out.push_back({"adam.m1." + np.name, np.param->moment1});
  for (const auto& np : params) out.push_back({"adam.m2." + np.name, np.param->moment2});
  out.push_back({"adam.step", Array::scalar(static_cast<double>(step))});
  return out;
}

SkipformerParams import_tensors(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const Array*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  auto scalar = [&](const std::string& key) -> std::size_t {
    auto it = by_name.find(key);
    if (it == by_name.end()) throw ConfigError("checkpoint missing " + key);
    return static_cast<std::size_t>(it->second->item());
  };

  ModelConfig cfg;
  cfg.feature_dim = scalar("config.feature_dim");
  cfg.vocab_size = scalar("config.vocab_size");
  cfg.encoder.M = scalar("config.M");
  cfg.encoder.N = scalar("config.N");
  cfg.encoder.d_model = scalar("config.d_model");
  cfg.encoder.heads = scalar("config.heads");
  cfg.encoder.ffn_dim = scalar("config.ffn_dim");
  cfg.encoder.k1 = scalar("config.k1");
  cfg.encoder.k2 = scalar("config.k2");
  cfg.decoder_depth = scalar("config.decoder_depth");

  SkipformerParams p(cfg, 0);
  const auto step_it = by_name.find("adam.step");
  const std::uint64_t step =
      step_it == by_name.end() ? 0 : static_cast<std::uint64_t>(step_it->second->item());
  for (auto& np : p.named_parameters()) {
    auto it = by_name.find("param." + np.name);
    if (it == by_name.end()) throw ConfigError("checkpoint missing parameter " + np.name);
    if (it->second->shape() != np.param->shape()) {
      throw ConfigError("checkpoint parameter " + np.name + " has shape " +
                        num::shape_string(it->second->shape()) + ", model expects " +
                        num::shape_string(np.param->shape()));
    }
    np.param->value.mutable_value() = *it->second;
    if (auto m1 = by_name.find("adam.m1." + np.name); m1 != by_name.end()) {
      np.param->moment1 = *m1->second;
    }
    if (auto m2 = by_name.find("adam.m2." + np.name); m2 != by_name.end()) {
      np.param->moment2 = *m2->second;
    }
    np.param->step_count = step;
  }
  return p;
}

}  // namespace skf::model
