#include "skipformer/harness/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>

#include "skipformer/errors.hpp"
#include "skipformer/harness/evaluate.hpp"
#include "skipformer/harness/trainer.hpp"

namespace skf::harness {

std::vector<bool> evenly_spaced_blank_flags(std::size_t length, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ParameterError("forced crucial fraction must lie in [0, 1]");
  }
  std::vector<bool> flags(length);
  for (std::size_t t = 0; t < length; ++t) {
    const bool non_blank = std::floor(static_cast<double>(t + 1) * fraction) >
                           std::floor(static_cast<double>(t) * fraction);
    flags[t] = !non_blank;
  }
  return flags;
}

double analytic_attention_ratio(std::size_t M, std::size_t N, std::size_t T,
                                std::size_t crucial) {
  const double t2 = static_cast<double>(T) * static_cast<double>(T);
  const double c2 = static_cast<double>(crucial) * static_cast<double>(crucial);
  return (static_cast<double>(M) * t2 + static_cast<double>(N) * c2) /
         (static_cast<double>(M + N) * t2);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Median per-item time of `pass`, which processes `items` items. Repeats the
// pass inside each timed sample until the sample is long enough to measure.
double median_time(const std::function<void()>& pass, std::size_t items, const BenchOptions& o) {
  auto start = Clock::now();
  pass();
  const double single = std::max(seconds_since(start), 1e-9);
  const std::size_t inner =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(o.min_pass_seconds / single)));
  std::vector<double> samples;
  for (std::size_t r = 0; r < o.repeats; ++r) {
    start = Clock::now();
    for (std::size_t i = 0; i < inner; ++i) pass();
    samples.push_back(seconds_since(start) / static_cast<double>(inner * items));
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

}  // namespace

BenchReport bench(const model::SkipformerParams& p, const Corpus& corpus,
                  const model::LossWeights& weights, const BenchOptions& opts) {
  if (opts.repeats < 3) throw ParameterError("bench needs at least 3 repeats");
  if (corpus.size() == 0) throw ParameterError("bench corpus is empty");
  check_vocabulary(p, corpus);
  const std::size_t M = p.config.encoder.M;
  const std::size_t N = p.config.encoder.N;
  const std::size_t n = corpus.size();

  std::vector<std::vector<bool>> forced;
  if (opts.force_crucial_fraction) {
    for (const auto& x : corpus.features) {
      forced.push_back(evenly_spaced_blank_flags(frontend::subsampled_length(x.length()),
                                                 *opts.force_crucial_fraction));
    }
  }

  auto run = [&](const model::LossWeights& w, bool skip, bool full) {
    return [&, w, skip, full]() {
      for (std::size_t i = 0; i < n; ++i) {
        model::ForwardOptions fo;
        fo.skip = skip;
        fo.final_head = full;
        if (!forced.empty()) fo.forced_blank_flags = &forced[i];
        const model::ForwardTrace tr = model::forward(corpus.features[i], p, w, fo);
        if (full) {
          const auto nbest = ctc::prefix_beam_search(tr.final_grid, opts.decode.beam);
          decoder::rescore(tr.h2, nbest, p.decoder, opts.decode.ctc_weight);
        }
      }
    };
  };

  // Per-utterance structure, collected outside the timed passes.
  auto describe = [&](const model::LossWeights& w, bool skip, BenchRow& row,
                      std::vector<std::uint64_t>& macs) {
    macs.clear();
    double analytic = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      model::ForwardOptions fo;
      fo.skip = skip;
      fo.final_head = false;
      if (!forced.empty()) fo.forced_blank_flags = &forced[i];
      const model::ForwardTrace tr = model::forward(corpus.features[i], p, w, fo);
      const auto& s = tr.stats;
      row.mean_T += static_cast<double>(s.subsampled_frames);
      row.mean_h2_length += static_cast<double>(s.output_frames());
      row.mean_crucial += static_cast<double>(s.crucial);
      row.mean_reduction += s.reduction_factor();
      row.mean_crucial_fraction +=
          static_cast<double>(s.crucial) / static_cast<double>(s.subsampled_frames);
      analytic += analytic_attention_ratio(M, N, s.subsampled_frames, s.crucial);
      macs.push_back(tr.attention_score_macs);
    }
    const double dn = static_cast<double>(n);
    row.mean_T /= dn;
    row.mean_h2_length /= dn;
    row.mean_crucial /= dn;
    row.mean_reduction /= dn;
    row.mean_crucial_fraction /= dn;
    row.analytic_ratio = analytic / dn;
  };

  BenchReport report;
  model::LossWeights base = weights;
  if (opts.beta) base.beta = *opts.beta;
  base.validate();

  BenchRow baseline;
  baseline.label = "no-skip";
  baseline.M = M;
  baseline.N = N;
  baseline.utterances = n;
  std::vector<std::uint64_t> base_macs;
  describe(base, false, baseline, base_macs);
  baseline.encoder_seconds = median_time(run(base, false, false), n, opts);
  if (opts.time_full_path) baseline.full_seconds = median_time(run(base, false, true), n, opts);
  report.rows.push_back(baseline);

  for (split::SplitMode mode : opts.modes) {
    model::LossWeights w = base;
    w.mode = mode;
    BenchRow row;
    row.mode = split::mode_number(mode);
    row.label = "mode" + std::to_string(row.mode);
    row.M = M;
    row.N = N;
    row.utterances = n;
    std::vector<std::uint64_t> macs;
    describe(w, true, row, macs);
    double counted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      counted += base_macs[i] ? static_cast<double>(macs[i]) / static_cast<double>(base_macs[i])
                              : 1.0;
    }
    row.counted_ratio = counted / static_cast<double>(n);
    row.encoder_seconds = median_time(run(w, true, false), n, opts);
    if (opts.time_full_path) row.full_seconds = median_time(run(w, true, true), n, opts);
    row.measured_ratio = row.encoder_seconds / baseline.encoder_seconds;
    row.agreement = row.measured_ratio / row.analytic_ratio;
    report.rows.push_back(row);
  }
  return report;
}

namespace {

const char* const kColumns[] = {"label",          "mode",           "M",
                                "N",              "utterances",     "mean_T",
                                "mean_h2_len",    "mean_crucial",   "mean_reduction",
                                "crucial_frac",   "encoder_ms",     "full_ms",
                                "analytic_ratio", "counted_ratio",  "measured_ratio",
                                "agreement"};

std::vector<std::string> cells(const BenchRow& r) {
  auto fmt = [](double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return std::string(buf);
  };
  return {r.label,
          std::to_string(r.mode),
          std::to_string(r.M),
          std::to_string(r.N),
          std::to_string(r.utterances),
          fmt(r.mean_T, 2),
          fmt(r.mean_h2_length, 2),
          fmt(r.mean_crucial, 2),
          fmt(r.mean_reduction, 3),
          fmt(r.mean_crucial_fraction, 4),
          fmt(r.encoder_seconds * 1e3, 4),
          fmt(r.full_seconds * 1e3, 4),
          fmt(r.analytic_ratio, 4),
          fmt(r.counted_ratio, 4),
          fmt(r.measured_ratio, 4),
          fmt(r.agreement, 4)};
}

}  // namespace

std::string to_tsv(const BenchReport& r) {
  std::ostringstream out;
  for (std::size_t i = 0; i < std::size(kColumns); ++i) out << (i ? "\t" : "") << kColumns[i];
  out << '\n';
  for (const auto& row : r.rows) {
    const auto c = cells(row);
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? "\t" : "") << c[i];
    out << '\n';
  }
  return out.str();
}

std::string to_text(const BenchReport& r) {
  std::vector<std::vector<std::string>> table;
  table.emplace_back(std::begin(kColumns), std::end(kColumns));
  for (const auto& row : r.rows) table.push_back(cells(row));
  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream out;
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) out << "  ";
      // Label left-aligned, numbers right-aligned.
      if (i == 0) {
        out << line[i] << std::string(width[i] - line[i].size(), ' ');
      } else {
        out << std::string(width[i] - line[i].size(), ' ') << line[i];
      }
    }
    out << '\n';
  }
  return out.str();
}

BenchReport sweep(const RunConfig& base, const Corpus& train_set, const Corpus* dev,
                  const Corpus& bench_set, const SweepOptions& opts) {
  if (opts.splits.empty()) throw ParameterError("sweep needs at least one (M, N) split");
  BenchReport all;
  for (const auto& [m, nn] : opts.splits) {
    RunConfig cfg = base;
    cfg.model.encoder.M = m;
    cfg.model.encoder.N = nn;
    cfg.out_dir = base.out_dir / ("M" + std::to_string(m) + "N" + std::to_string(nn));
    if (opts.progress) *opts.progress << "sweep: training M=" << m << " N=" << nn << '\n';
    train(cfg, train_set, dev, TrainOptions{{}, opts.progress});
    const model::SkipformerParams p = load_model(cfg.out_dir / "best.ckpt");
    BenchReport r = bench(p, bench_set, cfg.loss, opts.bench);
    all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
  }
  return all;
}

}  // namespace skf::harness
