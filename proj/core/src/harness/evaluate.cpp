#include "skipformer/harness/evaluate.hpp"

#include <algorithm>
#include <numeric>

#include "skipformer/errors.hpp"

namespace skf::harness {

using nlohmann::json;

Distribution summarize(std::vector<double> values) {
  Distribution d;
  if (values.empty()) return d;
  std::sort(values.begin(), values.end());
  d.min = values.front();
  d.max = values.back();
  const std::size_t n = values.size();
  d.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  return d;
}

double EvalReport::pooled_reduction() const {
  std::size_t in = 0;
  std::size_t out = 0;
  for (const auto& t : traces) {
    in += t.input_frames;
    out += t.crucial + t.trivial;
  }
  return out ? static_cast<double>(in) / static_cast<double>(out) : 0.0;
}

void check_vocabulary(const model::SkipformerParams& p, const Corpus& corpus) {
  const std::size_t v = p.config.vocab_size;
  for (const auto& t : corpus.transcripts) {
    for (std::size_t tok : t.tokens) {
      if (tok >= v) {
        throw ConfigError("utterance " + t.utterance_id + " uses token " + std::to_string(tok) +
                          " but the model vocabulary has " + std::to_string(v) + " entries");
      }
    }
  }
  for (const auto& f : corpus.features) {
    if (f.frames.cols() != p.config.feature_dim) {
      throw ConfigError("utterance " + f.utterance_id + " has " +
                        std::to_string(f.frames.cols()) + " features, model expects " +
                        std::to_string(p.config.feature_dim));
    }
  }
}

EvalReport evaluate(const model::SkipformerParams& p, const Corpus& corpus,
                    const model::LossWeights& weights, const EvalOptions& opts) {
  check_vocabulary(p, corpus);
  model::LossWeights w = weights;
  if (opts.mode) w.mode = *opts.mode;
  if (opts.beta) w.beta = *opts.beta;
  w.validate();

  model::ForwardOptions fo;
  fo.skip = opts.skip;
  EvalReport r;
  std::vector<double> reduction;
  std::vector<double> crucial;
  std::vector<double> trivial;
  std::vector<double> ignoring;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const model::ForwardTrace tr = model::forward(corpus.features[i], p, w, fo);
    ctc::TokenSequence hyp;
    if (opts.decode.method == DecodeMethod::kGreedy) {
      hyp = ctc::greedy_decode(tr.final_grid);
    } else {
      const auto nbest = ctc::prefix_beam_search(tr.final_grid, opts.decode.beam);
      hyp = decoder::rescore(tr.h2, nbest, p.decoder, opts.decode.ctc_weight);
    }
    r.errors.add(hyp, corpus.transcripts[i].tokens);
    r.traces.push_back(make_trace(corpus.features[i].utterance_id, tr));
    r.hypotheses.push_back(std::move(hyp));
    const double t = static_cast<double>(tr.stats.subsampled_frames);
    reduction.push_back(tr.stats.reduction_factor());
    crucial.push_back(static_cast<double>(tr.stats.crucial) / t);
    trivial.push_back(static_cast<double>(tr.stats.trivial) / t);
    ignoring.push_back(static_cast<double>(tr.stats.ignoring) / t);
    if (tr.fallback) ++r.fallbacks;
  }
  r.reduction = summarize(std::move(reduction));
  r.crucial_fraction = summarize(std::move(crucial));
  r.trivial_fraction = summarize(std::move(trivial));
  r.ignoring_fraction = summarize(std::move(ignoring));
  return r;
}

namespace {

json to_json(const Distribution& d) {
  return json{{"mean", d.mean}, {"min", d.min}, {"median", d.median}, {"max", d.max}};
}

}  // namespace

json to_json(const EvalReport& r) {
  return json{{"token_error_rate", r.token_error_rate()},
              {"edits", r.errors.edits},
              {"reference_tokens", r.errors.reference_tokens},
              {"utterances", r.traces.size()},
              {"reduction_factor", to_json(r.reduction)},
              {"pooled_reduction_factor", r.pooled_reduction()},
              {"crucial_fraction", to_json(r.crucial_fraction)},
              {"trivial_fraction", to_json(r.trivial_fraction)},
              {"ignoring_fraction", to_json(r.ignoring_fraction)},
              {"fallbacks", r.fallbacks}};
}

}  // namespace skf::harness
