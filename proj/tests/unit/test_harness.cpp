#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "skipformer/errors.hpp"
#include "skipformer/harness/bench.hpp"
#include "skipformer/harness/config.hpp"
#include "skipformer/harness/evaluate.hpp"
#include "skipformer/harness/metrics.hpp"
#include "skipformer/harness/synthetic.hpp"
#include "skipformer/harness/trainer.hpp"

using namespace skf;
using namespace skf::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("skf_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

SyntheticSpec tiny_spec() {
  SyntheticSpec s;
  s.vocab_size = 5;
  s.utterances = 6;
  s.tokens_min = 2;
  s.tokens_max = 3;
  s.frames_per_token_min = 4;
  s.frames_per_token_max = 5;
  s.gap_min = 4;
  s.gap_max = 6;
  s.feature_dim = 8;
  return s;
}

RunConfig tiny_run(const fs::path& out) {
  RunConfig c;
  c.synthetic = tiny_spec();
  c.model.feature_dim = 8;
  c.model.vocab_size = 5;
  c.model.decoder_depth = 1;
  c.model.encoder.M = 1;
  c.model.encoder.N = 1;
  c.model.encoder.d_model = 8;
  c.model.encoder.heads = 2;
  c.model.encoder.ffn_dim = 16;
  c.model.encoder.k1 = 3;
  c.model.encoder.k2 = 3;
  c.optimizer.warmup_steps = 2;
  c.training.epochs = 2;
  c.training.batch_size = 2;
  c.out_dir = out;
  return c;
}

}  // namespace

TEST(Synthetic, LayoutArithmetic) {
  SyntheticSpec s = tiny_spec();
  s.utterances = 1;
  s.tokens_min = s.tokens_max = 3;
  s.frames_per_token_min = s.frames_per_token_max = 2;
  s.gap_min = s.gap_max = 2;
  const Corpus c = generate_corpus(s);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.features[0].length(), 14u);
  EXPECT_EQ(c.transcripts[0].tokens.size(), 3u);
  EXPECT_NEAR(c.gap_fraction, 8.0 / 14.0, 1e-12);
  for (std::size_t tok : c.transcripts[0].tokens) {
    EXPECT_GE(tok, 1u);
    EXPECT_LT(tok, 5u);
  }
}

TEST(Synthetic, DeterministicAndBitIdenticalOnDisk) {
  const fs::path dir = scratch("gen");
  save_corpus(generate_corpus(tiny_spec()), dir / "a.bin", dir / "a.tsv");
  save_corpus(generate_corpus(tiny_spec()), dir / "b.bin", dir / "b.tsv");
  EXPECT_EQ(slurp(dir / "a.bin"), slurp(dir / "b.bin"));
  EXPECT_EQ(slurp(dir / "a.tsv"), slurp(dir / "b.tsv"));
  const Corpus back = load_corpus(dir / "a.bin", dir / "a.tsv");
  EXPECT_EQ(back.transcripts, generate_corpus(tiny_spec()).transcripts);

  SyntheticSpec other = tiny_spec();
  other.stream = 1;
  EXPECT_NE(generate_corpus(other).transcripts, back.transcripts);
}

TEST(Synthetic, NoiselessGapsAreIdenticalRows) {
  SyntheticSpec s = tiny_spec();
  s.noise = 0.0;
  const Corpus c = generate_corpus(s);
  const auto& f = c.features[0].frames;
  // The first gap_min frames are always silence.
  for (std::size_t r = 1; r < s.gap_min; ++r) {
    for (std::size_t col = 0; col < f.cols(); ++col) EXPECT_EQ(f(r, col), f(0, col));
  }
}

TEST(Synthetic, SpecValidation) {
  SyntheticSpec s = tiny_spec();
  s.tokens_min = 4;
  s.tokens_max = 3;
  EXPECT_THROW(s.validate(), ConfigError);
  s = tiny_spec();
  s.vocab_size = 1;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Transcripts, RoundTripAndErrors) {
  const fs::path dir = scratch("tsv");
  const std::vector<Transcript> t{{"a", {1, 2, 3}}, {"b", {4}}};
  save_transcripts(dir / "t.tsv", t);
  EXPECT_EQ(load_transcripts(dir / "t.tsv"), t);
  for (const char* bad : {"a 1 2\n", "a\t1 x\n", "a\t0 1\n", "a\t-2\n"}) {
    std::ofstream(dir / "bad.tsv") << bad;
    EXPECT_THROW(load_transcripts(dir / "bad.tsv"), ConfigError) << bad;
  }
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_NO_THROW(config_from_json(nlohmann::json::object()));
  try {
    config_from_json(nlohmann::json::parse(R"({"model": {"depth": 3}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.depth"), std::string::npos);
  }
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"bogus": {}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"loss": {"mode": 7}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"decode": {"method": "viterbi"}})")),
               ConfigError);
}

TEST(Config, JsonRoundTrip) {
  RunConfig c = tiny_run("somewhere");
  c.loss.mode = split::SplitMode::kMode4;
  c.decode.method = DecodeMethod::kRescoring;
  const RunConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.loss.mode, split::SplitMode::kMode4);
}

TEST(Metrics, EditDistanceAndErrorRate) {
  EXPECT_EQ(edit_distance({1, 2, 3}, {1, 2, 3}), 0u);
  EXPECT_EQ(edit_distance({}, {1, 2}), 2u);
  EXPECT_EQ(edit_distance({1, 3}, {1, 2, 3}), 1u);
  EXPECT_EQ(edit_distance({2, 1}, {1, 2}), 2u);
  ErrorCounter e;
  EXPECT_EQ(e.rate(), 0.0);
  e.add({1, 3}, {1, 2, 3});
  e.add({4}, {4});
  EXPECT_NEAR(e.rate(), 0.25, 1e-15);
}

TEST(Metrics, TraceJsonRoundTrip) {
  TraceRecord r{"u1", 103, 25, 5, 3, 17, false, 103.0 / 8.0};
  const TraceRecord back = trace_from_json(to_json(r));
  EXPECT_EQ(back.utterance_id, "u1");
  EXPECT_EQ(back.crucial, 5u);
  EXPECT_EQ(back.reduction_factor, r.reduction_factor);
  const fs::path dir = scratch("trace");
  save_traces(dir / "t.jsonl", {r, r});
  EXPECT_EQ(load_traces(dir / "t.jsonl").size(), 2u);
}

TEST(Schedule, WarmupThenInverseSqrt) {
  OptimizerConfig o;
  o.lr = 1e-3;
  o.warmup_steps = 100;
  EXPECT_NEAR(learning_rate(o, 1), 1e-5, 1e-18);
  EXPECT_NEAR(learning_rate(o, 50), 5e-4, 1e-15);
  EXPECT_NEAR(learning_rate(o, 100), 1e-3, 1e-15);
  EXPECT_NEAR(learning_rate(o, 400), 5e-4, 1e-15);
  o.warmup_steps = 0;
  EXPECT_NEAR(learning_rate(o, 4), 5e-4, 1e-15);
}

TEST(Train, ZeroEpochsSavesInitialization) {
  const fs::path dir = scratch("zero");
  RunConfig c = tiny_run(dir);
  c.training.epochs = 0;
  const Corpus corpus = generate_corpus(c.synthetic);
  train(c, corpus, nullptr);
  model::SkipformerParams init(c.model, c.training.seed);
  model::SkipformerParams saved = load_model(dir / "best.ckpt");
  auto a = model::export_tensors(init);
  auto b = model::export_tensors(saved);
  EXPECT_EQ(a, b);
}

TEST(Train, ReproducibleAndResumable) {
  const fs::path d1 = scratch("run1");
  const fs::path d2 = scratch("run2");
  RunConfig c = tiny_run(d1);
  const Corpus corpus = generate_corpus(c.synthetic);
  const TrainSummary s1 = train(c, corpus, nullptr);
  c.out_dir = d2;
  train(c, corpus, nullptr);
  EXPECT_EQ(s1.steps, 6u);
  EXPECT_EQ(slurp(d1 / "metrics.jsonl"), slurp(d2 / "metrics.jsonl"));
  EXPECT_EQ(slurp(d1 / "last.ckpt"), slurp(d2 / "last.ckpt"));
  const auto records = read_jsonl(d1 / "metrics.jsonl");
  ASSERT_EQ(records.size(), 2u);
  for (const char* key : {"step", "epoch", "lr", "train_loss", "eval_ter", "eval_reduction",
                          "fallback_fraction", "fallback_warning"}) {
    EXPECT_TRUE(records[0].contains(key)) << key;
  }

  // One epoch, then resume for the second: same end state as the straight run.
  const fs::path d3 = scratch("run3");
  c.out_dir = d3;
  c.training.epochs = 1;
  train(c, corpus, nullptr);
  c.training.epochs = 2;
  TrainOptions resume;
  resume.resume = d3 / "last.ckpt";
  const TrainSummary s3 = train(c, corpus, nullptr, resume);
  EXPECT_EQ(s3.steps, s1.steps);
  EXPECT_EQ(slurp(d3 / "last.ckpt"), slurp(d1 / "last.ckpt"));
}

TEST(Evaluate, VocabularyMismatchIsConfigError) {
  RunConfig c = tiny_run("unused");
  const model::SkipformerParams p(c.model, 1);
  SyntheticSpec s = tiny_spec();
  s.vocab_size = 9;
  s.utterances = 20;
  EXPECT_THROW(evaluate(p, generate_corpus(s), model::LossWeights{}, EvalOptions{}), ConfigError);
  s = tiny_spec();
  s.feature_dim = 9;
  EXPECT_THROW(check_vocabulary(p, generate_corpus(s)), ConfigError);
}

TEST(Evaluate, ReportsAndTraces) {
  RunConfig c = tiny_run("unused");
  const model::SkipformerParams p(c.model, 1);
  const Corpus corpus = generate_corpus(c.synthetic);
  const EvalReport greedy = evaluate(p, corpus, model::LossWeights{}, EvalOptions{});
  ASSERT_EQ(greedy.traces.size(), corpus.size());
  ASSERT_EQ(greedy.hypotheses.size(), corpus.size());
  for (const auto& t : greedy.traces) {
    EXPECT_EQ(t.crucial + t.trivial + t.ignoring, t.subsampled_frames);
    EXPECT_NEAR(t.reduction_factor,
                static_cast<double>(t.input_frames) / static_cast<double>(t.crucial + t.trivial),
                1e-12);
  }
  EXPECT_LE(greedy.reduction.min, greedy.reduction.median);
  EXPECT_LE(greedy.reduction.median, greedy.reduction.max);
  EXPECT_TRUE(to_json(greedy).contains("token_error_rate"));

  EvalOptions rescoring;
  rescoring.decode = {DecodeMethod::kRescoring, 1, 0.5};
  const EvalReport r = evaluate(p, corpus, model::LossWeights{}, rescoring);
  EXPECT_EQ(r.traces.size(), corpus.size());
}

TEST(Evaluate, ModeOneNeverReducesMoreThanModeTwo) {
  RunConfig c = tiny_run("unused");
  const model::SkipformerParams p(c.model, 1);
  const Corpus corpus = generate_corpus(c.synthetic);
  EvalOptions o1;
  o1.mode = split::SplitMode::kMode1;
  o1.beta = 0.01;
  EvalOptions o2 = o1;
  o2.mode = split::SplitMode::kMode2;
  const EvalReport r1 = evaluate(p, corpus, model::LossWeights{}, o1);
  const EvalReport r2 = evaluate(p, corpus, model::LossWeights{}, o2);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_LE(r1.traces[i].reduction_factor, r2.traces[i].reduction_factor);
  }
}

TEST(Summarize, Distribution) {
  const Distribution d = summarize({4.0, 1.0, 3.0, 2.0});
  EXPECT_EQ(d.min, 1.0);
  EXPECT_EQ(d.max, 4.0);
  EXPECT_EQ(d.mean, 2.5);
  EXPECT_EQ(d.median, 2.5);
}

TEST(Bench, AnalyticRatio) {
  EXPECT_NEAR(analytic_attention_ratio(2, 2, 30, 30), 1.0, 1e-15);
  EXPECT_NEAR(analytic_attention_ratio(2, 2, 30, 10), (2.0 + 2.0 / 9.0) / 4.0, 1e-15);
  EXPECT_NEAR(analytic_attention_ratio(2, 2, 30, 10), 0.5556, 1e-4);
}

TEST(Bench, EvenlySpacedFlags) {
  const auto third = evenly_spaced_blank_flags(9, 1.0 / 3.0);
  std::size_t non_blank = 0;
  for (bool b : third) non_blank += !b;
  EXPECT_EQ(non_blank, 3u);
  for (bool b : evenly_spaced_blank_flags(7, 1.0)) EXPECT_FALSE(b);
  const auto quarter = evenly_spaced_blank_flags(400, 0.25);
  EXPECT_EQ(std::count(quarter.begin(), quarter.end(), false), 100);
}

TEST(Bench, RowsAndOutputs) {
  RunConfig c = tiny_run("unused");
  const model::SkipformerParams p(c.model, 1);
  SyntheticSpec s = tiny_spec();
  s.utterances = 2;
  const Corpus corpus = generate_corpus(s);
  BenchOptions o;
  o.modes = {split::SplitMode::kMode1, split::SplitMode::kMode2};
  o.force_crucial_fraction = 1.0;
  o.min_pass_seconds = 0.0;
  const BenchReport r = bench(p, corpus, model::LossWeights{}, o);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].label, "no-skip");
  EXPECT_EQ(r.rows[2].mode, 2);
  for (const auto& row : r.rows) {
    EXPECT_NEAR(row.analytic_ratio, 1.0, 1e-12);
    EXPECT_NEAR(row.counted_ratio, 1.0, 1e-12);
    EXPECT_GT(row.encoder_seconds, 0.0);
  }
  const std::string tsv = to_tsv(r);
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 4);
  EXPECT_NE(to_text(r).find("mode2"), std::string::npos);
  o.repeats = 2;
  EXPECT_THROW(bench(p, corpus, model::LossWeights{}, o), ParameterError);
}
