// skipformer: synthetic data generation, training, evaluation and
// benchmarking for the skip-and-recover encoder.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "skipformer/errors.hpp"
#include "skipformer/harness/bench.hpp"
#include "skipformer/harness/config.hpp"
#include "skipformer/harness/evaluate.hpp"
#include "skipformer/harness/metrics.hpp"
#include "skipformer/harness/synthetic.hpp"
#include "skipformer/harness/trainer.hpp"

namespace fs = std::filesystem;
using namespace skf;
using namespace skf::harness;

namespace {

struct SharedFlags {
  std::string config;
  std::optional<int> split_mode;
  std::optional<double> blank_threshold;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::string out;
};

void add_shared(CLI::App* app, SharedFlags& f) {
  app->add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
  app->add_option("--split-mode", f.split_mode, "split mode 1-5")->check(CLI::Range(1, 5));
  app->add_option("--blank-threshold", f.blank_threshold, "blank posterior threshold beta");
  app->add_option("--seed", f.seed, "random seed");
  app->add_option("--checkpoint", f.checkpoint, "model checkpoint");
  app->add_option("--out", f.out, "output directory or file");
}

RunConfig resolve_config(const SharedFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.split_mode) c.loss.mode = split::mode_from_int(*f.split_mode);
  if (f.blank_threshold) c.loss.beta = *f.blank_threshold;
  if (f.seed) {
    c.training.seed = *f.seed;
    c.synthetic.seed = *f.seed;
  }
  c.validate();
  return c;
}

struct CorpusFlags {
  std::string features;
  std::string transcripts;
};

void add_corpus(CLI::App* app, CorpusFlags& f, const std::string& prefix = "") {
  app->add_option("--" + prefix + "features", f.features, "feature file")
      ->check(CLI::ExistingFile);
  app->add_option("--" + prefix + "transcripts", f.transcripts, "transcript file")
      ->check(CLI::ExistingFile);
}

// Explicit files win, then the config's data section, then synthetic data
// generated from the config.
Corpus resolve_corpus(const CorpusFlags& f, const fs::path& cfg_features,
                      const fs::path& cfg_transcripts, const RunConfig& c) {
  if (!f.features.empty() || !f.transcripts.empty()) {
    if (f.features.empty() || f.transcripts.empty()) {
      throw ConfigError("--features and --transcripts must be given together");
    }
    return load_corpus(f.features, f.transcripts);
  }
  if (!cfg_features.empty()) return load_corpus(cfg_features, cfg_transcripts);
  return generate_corpus(c.synthetic);
}

std::vector<split::SplitMode> parse_modes(const std::vector<int>& modes) {
  std::vector<split::SplitMode> out;
  for (int m : modes) out.push_back(split::mode_from_int(m));
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_splits(const std::vector<std::string>& s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& item : s) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("split '" + item + "' is not M:N");
    try {
      out.emplace_back(std::stoul(item.substr(0, colon)), std::stoul(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ConfigError("split '" + item + "' is not M:N");
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skip-and-recover speech encoder toolkit"};
  app.require_subcommand(1);

  // gen
  SharedFlags gen_flags;
  std::optional<std::size_t> gen_utterances;
  std::optional<std::uint64_t> gen_stream;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  add_shared(gen, gen_flags);
  gen->add_option("--utterances", gen_utterances, "number of utterances");
  gen->add_option("--stream", gen_stream, "utterance stream (0 train, 1 dev, ...)");

  // train
  SharedFlags train_flags;
  CorpusFlags train_corpus;
  CorpusFlags dev_corpus;
  std::optional<std::size_t> train_epochs;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_shared(train_cmd, train_flags);
  add_corpus(train_cmd, train_corpus);
  add_corpus(train_cmd, dev_corpus, "dev-");
  train_cmd->add_option("--epochs", train_epochs, "override training.epochs");

  // eval
  SharedFlags eval_flags;
  CorpusFlags eval_corpus;
  std::string eval_decode;
  std::optional<std::size_t> eval_beam;
  std::string trace_dump;
  bool eval_no_skip = false;
  CLI::App* eval = app.add_subcommand("eval", "decode a corpus and report error rate");
  add_shared(eval, eval_flags);
  add_corpus(eval, eval_corpus);
  eval->add_option("--decode", eval_decode, "greedy or rescoring");
  eval->add_option("--beam", eval_beam, "prefix beam width for rescoring");
  eval->add_option("--trace-dump", trace_dump, "write per-utterance frame accounting (JSONL)");
  eval->add_flag("--no-skip", eval_no_skip, "run every frame through both sub-encoders");

  // bench
  SharedFlags bench_flags;
  CorpusFlags bench_corpus;
  std::vector<int> bench_modes{1, 2, 3, 4, 5};
  std::size_t bench_repeats = 3;
  std::optional<double> force_fraction;
  bool encoder_only = false;
  CLI::App* bench_cmd = app.add_subcommand("bench", "time skip vs no-skip inference");
  add_shared(bench_cmd, bench_flags);
  add_corpus(bench_cmd, bench_corpus);
  bench_cmd->add_option("--modes", bench_modes, "split modes to time")->delimiter(',');
  bench_cmd->add_option("--repeats", bench_repeats, "timed repeats (>= 3)");
  bench_cmd->add_option("--force-crucial-fraction", force_fraction,
                        "replace posteriors with evenly spaced crucial frames");
  bench_cmd->add_flag("--encoder-only", encoder_only, "skip timing the rescoring path");

  // sweep
  SharedFlags sweep_flags;
  CorpusFlags sweep_train;
  CorpusFlags sweep_bench;
  std::vector<int> sweep_modes{1, 2, 3, 4, 5};
  std::vector<std::string> sweep_splits{"2:2", "1:3", "3:1"};
  std::size_t sweep_repeats = 3;
  std::optional<std::size_t> sweep_epochs;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "train and bench over (M, N) and modes");
  add_shared(sweep_cmd, sweep_flags);
  add_corpus(sweep_cmd, sweep_train);
  add_corpus(sweep_cmd, sweep_bench, "bench-");
  sweep_cmd->add_option("--modes", sweep_modes, "split modes")->delimiter(',');
  sweep_cmd->add_option("--splits", sweep_splits, "M:N pairs")->delimiter(',');
  sweep_cmd->add_option("--repeats", sweep_repeats, "timed repeats (>= 3)");
  sweep_cmd->add_option("--epochs", sweep_epochs, "override training.epochs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      RunConfig c = resolve_config(gen_flags);
      if (gen_utterances) c.synthetic.utterances = *gen_utterances;
      if (gen_stream) c.synthetic.stream = *gen_stream;
      const fs::path out = gen_flags.out.empty() ? fs::path("data") : fs::path(gen_flags.out);
      fs::create_directories(out);
      const Corpus corpus = generate_corpus(c.synthetic);
      save_corpus(corpus, out / "features.bin", out / "transcripts.tsv");
      std::cout << "wrote " << corpus.size() << " utterances to " << out.string()
                << " (gap fraction " << corpus.gap_fraction << ")\n";
    } else if (*train_cmd) {
      RunConfig c = resolve_config(train_flags);
      if (train_epochs) c.training.epochs = *train_epochs;
      if (!train_flags.out.empty()) c.out_dir = train_flags.out;
      const Corpus tr =
          resolve_corpus(train_corpus, c.data.train_features, c.data.train_transcripts, c);
      std::optional<Corpus> dev;
      if (!dev_corpus.features.empty() || !c.data.dev_features.empty()) {
        dev = resolve_corpus(dev_corpus, c.data.dev_features, c.data.dev_transcripts, c);
      }
      TrainOptions opts;
      opts.resume = train_flags.checkpoint;
      opts.progress = &std::cerr;
      const TrainSummary s = train(c, tr, dev ? &*dev : nullptr, opts);
      std::cout << "steps " << s.steps << ", best token error rate "
                << s.best_token_error_rate << ", checkpoints in " << c.out_dir.string() << '\n';
    } else if (*eval) {
      if (eval_flags.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
      RunConfig c = resolve_config(eval_flags);
      const model::SkipformerParams p = load_model(eval_flags.checkpoint);
      const fs::path feats = c.data.dev_features.empty() ? c.data.train_features
                                                         : c.data.dev_features;
      const fs::path trans = c.data.dev_features.empty() ? c.data.train_transcripts
                                                         : c.data.dev_transcripts;
      const Corpus corpus = resolve_corpus(eval_corpus, feats, trans, c);
      EvalOptions opts;
      opts.decode = c.decode;
      if (!eval_decode.empty()) opts.decode.method = decode_method_from_string(eval_decode);
      if (eval_beam) opts.decode.beam = *eval_beam;
      opts.skip = !eval_no_skip;
      const EvalReport r = evaluate(p, corpus, c.loss, opts);
      if (!trace_dump.empty()) save_traces(trace_dump, r.traces);
      const std::string report = to_json(r).dump(2);
      if (!eval_flags.out.empty()) write_text(eval_flags.out, report + "\n");
      std::cout << report << '\n';
    } else if (*bench_cmd) {
      if (bench_flags.checkpoint.empty()) throw ConfigError("bench needs --checkpoint");
      RunConfig c = resolve_config(bench_flags);
      const model::SkipformerParams p = load_model(bench_flags.checkpoint);
      const Corpus corpus = resolve_corpus(bench_corpus, c.data.dev_features,
                                           c.data.dev_transcripts, c);
      BenchOptions opts;
      opts.modes = parse_modes(bench_modes);
      opts.repeats = bench_repeats;
      opts.force_crucial_fraction = force_fraction;
      opts.decode.beam = c.decode.beam;
      opts.decode.ctc_weight = c.decode.ctc_weight;
      opts.time_full_path = !encoder_only;
      const BenchReport r = bench(p, corpus, c.loss, opts);
      if (!bench_flags.out.empty()) {
        fs::create_directories(bench_flags.out);
        write_text(fs::path(bench_flags.out) / "bench.tsv", to_tsv(r));
        write_text(fs::path(bench_flags.out) / "bench.txt", to_text(r));
      }
      std::cout << to_text(r);
    } else if (*sweep_cmd) {
      RunConfig c = resolve_config(sweep_flags);
      if (sweep_epochs) c.training.epochs = *sweep_epochs;
      if (!sweep_flags.out.empty()) c.out_dir = sweep_flags.out;
      const Corpus tr =
          resolve_corpus(sweep_train, c.data.train_features, c.data.train_transcripts, c);
      std::optional<Corpus> dev;
      if (!c.data.dev_features.empty()) {
        dev = load_corpus(c.data.dev_features, c.data.dev_transcripts);
      }
      std::optional<Corpus> bench_set;
      if (!sweep_bench.features.empty()) bench_set = resolve_corpus(sweep_bench, {}, {}, c);
      SweepOptions opts;
      opts.splits = parse_splits(sweep_splits);
      opts.bench.modes = parse_modes(sweep_modes);
      opts.bench.repeats = sweep_repeats;
      opts.bench.time_full_path = false;
      opts.progress = &std::cerr;
      const Corpus& bs = bench_set ? *bench_set : (dev ? *dev : tr);
      const BenchReport r = sweep(c, tr, dev ? &*dev : nullptr, bs, opts);
      fs::create_directories(c.out_dir);
      write_text(c.out_dir / "sweep.tsv", to_tsv(r));
      write_text(c.out_dir / "sweep.txt", to_text(r));
      std::cout << to_text(r);
    }
  } catch (const skf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
