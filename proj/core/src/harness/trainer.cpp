#include "skipformer/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "skipformer/errors.hpp"
#include "skipformer/harness/evaluate.hpp"
#include "skipformer/harness/metrics.hpp"

namespace skf::harness {

using nlohmann::json;
using num::Array;

double learning_rate(const OptimizerConfig& o, std::uint64_t step) {
  const double s = static_cast<double>(std::max<std::uint64_t>(step, 1));
  if (o.warmup_steps == 0) return o.lr / std::sqrt(s);
  const double w = static_cast<double>(o.warmup_steps);
  return o.lr * std::min(s / w, std::sqrt(w / s));
}

void save_model(const std::filesystem::path& path, model::SkipformerParams& p,
                const TrainState& state) {
  auto tensors = model::export_tensors(p);
  tensors.push_back({"train.epoch", Array::scalar(static_cast<double>(state.epoch))});
  tensors.push_back({"train.batch", Array::scalar(static_cast<double>(state.batch))});
  tensors.push_back({"train.best_ter", Array::scalar(state.best_token_error_rate)});
  num::save_checkpoint(path, tensors);
}

model::SkipformerParams load_model(const std::filesystem::path& path, TrainState* state) {
  const auto tensors = num::load_checkpoint(path);
  if (state) {
    *state = TrainState{};
    for (const auto& t : tensors) {
      if (t.name == "train.epoch") state->epoch = static_cast<std::size_t>(t.value.item());
      if (t.name == "train.batch") state->batch = static_cast<std::size_t>(t.value.item());
      if (t.name == "train.best_ter") state->best_token_error_rate = t.value.item();
    }
  }
  return model::import_tensors(tensors);
}

namespace {

struct Accumulator {
  double loss = 0.0;
  model::LossComponents parts;
  std::size_t utterances = 0;
  std::size_t fallbacks = 0;
  std::size_t skipped = 0;

  void add(double total, const model::LossComponents& c, bool fallback) {
    loss += total;
    parts.ctc_inter += c.ctc_inter;
    parts.ctc_final += c.ctc_final;
    parts.aed_inter += c.aed_inter;
    parts.aed_final += c.aed_final;
    ++utterances;
    if (fallback) ++fallbacks;
  }

  double mean(double v) const { return utterances ? v / static_cast<double>(utterances) : 0.0; }
};

bool same_model_shape(const model::ModelConfig& a, const model::ModelConfig& b) {
  const auto& x = a.encoder;
  const auto& y = b.encoder;
  return a.feature_dim == b.feature_dim && a.vocab_size == b.vocab_size &&
         a.decoder_depth == b.decoder_depth && x.M == y.M && x.N == y.N &&
         x.d_model == y.d_model && x.heads == y.heads && x.ffn_dim == y.ffn_dim &&
         x.k1 == y.k1 && x.k2 == y.k2;
}

// Scales accumulated gradients by 1/count and clips their global norm.
std::vector<Array> collect_gradients(ParamList& params, std::size_t count, double clip) {
  std::vector<Array> grads;
  grads.reserve(params.size());
  double sq = 0.0;
  const double scale = 1.0 / static_cast<double>(count);
  for (auto& np : params) {
    const num::Var& v = np.param->value;
    Array g = v.has_grad() ? v.grad() : Array(v.shape());
    for (double& x : g.values()) {
      x *= scale;
      sq += x * x;
    }
    grads.push_back(std::move(g));
  }
  const double norm = std::sqrt(sq);
  if (clip > 0.0 && norm > clip) {
    const double f = clip / norm;
    for (auto& g : grads) {
      for (double& x : g.values()) x *= f;
    }
  }
  return grads;
}

}  // namespace

TrainSummary train(const RunConfig& config, const Corpus& train_set, const Corpus* dev,
                   const TrainOptions& opts) {
  config.validate();
  if (train_set.size() == 0) throw ConfigError("training corpus is empty");
  std::filesystem::create_directories(config.out_dir);

  TrainState state;
  model::SkipformerParams params;
  if (!opts.resume.empty()) {
    params = load_model(opts.resume, &state);
    if (!same_model_shape(params.config, config.model)) {
      throw ConfigError("checkpoint " + opts.resume.string() +
                        " does not match the configured model shape");
    }
  } else {
    params = model::SkipformerParams(config.model, config.training.seed);
  }
  check_vocabulary(params, train_set);
  const Corpus& eval_set = dev ? *dev : train_set;
  check_vocabulary(params, eval_set);

  ParamList named = params.named_parameters();
  std::uint64_t step = named.empty() ? 0 : named.front().param->step_count;

  JsonlWriter log(config.out_dir / "metrics.jsonl", opts.resume.empty());
  const auto best_path = config.out_dir / "best.ckpt";
  const auto last_path = config.out_dir / "last.ckpt";
  if (opts.resume.empty()) std::filesystem::remove(best_path);
  if (config.training.epochs == 0) {
    save_model(best_path, params, state);
    save_model(last_path, params, state);
    TrainSummary s;
    s.steps = step;
    s.best_token_error_rate = state.best_token_error_rate;
    return s;
  }

  const auto& tc = config.training;
  const model::LossWeights& w = config.loss;
  EvalOptions eval_opts;
  eval_opts.decode = config.decode;

  Accumulator acc;
  std::size_t storms = 0;
  TrainSummary summary;
  summary.best_token_error_rate = state.best_token_error_rate;
  std::uint64_t last_eval_step = step;

  auto run_eval = [&](std::size_t epoch_label) {
    const EvalReport r = evaluate(params, eval_set, w, eval_opts);
    json rec{{"step", step},
             {"epoch", epoch_label},
             {"lr", learning_rate(config.optimizer, std::max<std::uint64_t>(step, 1))},
             {"train_loss", acc.mean(acc.loss)},
             {"ctc_inter", acc.mean(acc.parts.ctc_inter)},
             {"ctc_final", acc.mean(acc.parts.ctc_final)},
             {"aed_inter", acc.mean(acc.parts.aed_inter)},
             {"aed_final", acc.mean(acc.parts.aed_final)},
             {"eval_ter", r.token_error_rate()},
             {"eval_reduction", r.reduction.mean},
             {"eval_crucial_fraction", r.crucial_fraction.mean},
             {"fallback_fraction", acc.mean(static_cast<double>(acc.fallbacks))},
             {"skipped", acc.skipped},
             {"fallback_storms", storms},
             {"fallback_warning", storms > 0}};
    log.write(rec);
    if (opts.progress) *opts.progress << rec.dump() << '\n';
    if (r.token_error_rate() < state.best_token_error_rate) {
      state.best_token_error_rate = r.token_error_rate();
      save_model(best_path, params, state);
    }
    summary.best_token_error_rate = state.best_token_error_rate;
    summary.last_record = std::move(rec);
    acc = Accumulator{};
    storms = 0;
    last_eval_step = step;
  };

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + tc.batch_size - 1) / tc.batch_size;
  for (std::size_t epoch = state.epoch; epoch < tc.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq shuffle_seed{tc.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{1}};
    std::mt19937_64 shuffle_rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::seed_seq dropout_seed{tc.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{2}};
    std::mt19937_64 dropout_rng(dropout_seed);

    for (std::size_t b = state.batch; b < batches; ++b) {
      std::size_t used = 0;
      std::size_t batch_fallbacks = 0;
      const std::size_t end = std::min(n, (b + 1) * tc.batch_size);
      for (std::size_t k = b * tc.batch_size; k < end; ++k) {
        const auto& x = train_set.features[order[k]];
        const auto& y = train_set.transcripts[order[k]].tokens;
        num::Tape tape;
        num::TapeScope scope(tape);
        model::ForwardOptions fo;
        fo.target = &y;
        fo.dropout = config.model.encoder.dropout;
        fo.rng = &dropout_rng;
        try {
          const model::ForwardTrace tr = model::forward(x, params, w, fo);
          const model::LossResult loss = model::total_loss(tr, y, params, w);
          tape.backward(loss.total);
          acc.add(loss.total.item(), loss.components, tr.fallback);
          if (tr.fallback) ++batch_fallbacks;
          ++used;
        } catch (const InfeasibleAlignmentError&) {
          // The utterance is too short for its transcript even without skipping.
          ++acc.skipped;
        } catch (const InputTooShortError&) {
          ++acc.skipped;
        }
      }
      if (used > 0) {
        ++step;
        const double lr = learning_rate(config.optimizer, step);
        auto grads = collect_gradients(named, used, config.optimizer.grad_clip);
        for (std::size_t i = 0; i < named.size(); ++i) {
          num::adam_step(*named[i].param, grads[i], lr, config.optimizer.beta1,
                         config.optimizer.beta2, config.optimizer.eps);
        }
        if (step > config.optimizer.warmup_steps &&
            static_cast<double>(batch_fallbacks) >
                kFallbackWarnFraction * static_cast<double>(used)) {
          ++storms;
        }
      }
      for (auto& np : named) np.param->value.zero_grad();
      state.batch = b + 1;
      if (tc.eval_every > 0 && step > last_eval_step && step % tc.eval_every == 0) {
        run_eval(epoch);
      }
    }
    state.epoch = epoch + 1;
    state.batch = 0;
    if (tc.eval_every == 0) run_eval(epoch);
    save_model(last_path, params, state);
  }
  if (step > last_eval_step) run_eval(tc.epochs - 1);
  save_model(last_path, params, state);
  if (!std::filesystem::exists(best_path)) save_model(best_path, params, state);
  summary.steps = step;
  summary.epochs = state.epoch;
  return summary;
}

}  // namespace skf::harness
