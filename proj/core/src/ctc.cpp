#include "skipformer/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "skipformer/errors.hpp"

namespace skf::ctc {

using num::Array;
using num::Shape;
using num::Var;

PosteriorGrid grid_from_log_probs(Array log_probs) {
  if (log_probs.rank() != 2) {
    throw DimensionError("posterior grid must be (L, V), got " +
                         num::shape_string(log_probs.shape()));
  }
  return PosteriorGrid{Var(std::move(log_probs))};
}

CtcHead::CtcHead(std::size_t d_model, std::size_t vocab, std::mt19937_64& rng)
    : projection(d_model, vocab, rng) {
  if (vocab < 2) throw ParameterError("CTC vocabulary needs blank plus at least one token");
}

void CtcHead::collect(ParamList& out, const std::string& prefix) {
  projection.collect(out, prefix + ".projection");
}

PosteriorGrid ctc_head(const encoder::EncodedSequence& h, const CtcHead& head) {
  if (h.length() == 0) throw ContractError("ctc_head on an empty sequence");
  return PosteriorGrid{num::log_softmax_rows(head.projection(h.frames))};
}

std::size_t min_frames(const TokenSequence& y) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (y[i] == y[i - 1]) ++repeats;
  }
  return y.size() + repeats;
}

void validate_tokens(const TokenSequence& y, std::size_t vocab) {
  for (std::size_t tok : y) {
    if (tok == kBlank || tok >= vocab) {
      throw ContractError("token " + std::to_string(tok) + " outside [1, " +
                          std::to_string(vocab) + ")");
    }
  }
}

Var ctc_loss(const PosteriorGrid& g, const TokenSequence& y) {
  const std::size_t frames = g.frames();
  const std::size_t vocab = g.vocab();
  validate_tokens(y, vocab);
  const std::size_t need = min_frames(y);
  if (frames == 0 || frames < need) throw InfeasibleAlignmentError(frames, std::max<std::size_t>(need, 1));

  // Blank-interleaved target: -, y1, -, y2, ..., -
  const std::size_t states = 2 * y.size() + 1;
  std::vector<std::size_t> ext(states, kBlank);
  for (std::size_t i = 0; i < y.size(); ++i) ext[2 * i + 1] = y[i];

  std::vector<std::vector<std::size_t>> transitions(states);
  for (std::size_t s = 0; s < states; ++s) {
    transitions[s].push_back(s);
    if (s >= 1) transitions[s].push_back(s - 1);
    if (s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]) transitions[s].push_back(s - 2);
  }

  auto emissions = [&](std::size_t t) {
    std::vector<std::size_t> idx(states);
    for (std::size_t s = 0; s < states; ++s) idx[s] = t * vocab + ext[s];
    return num::gather_elems(g.log_probs, idx);
  };

  Array start_mask(Shape{states}, num::kLogZero);
  start_mask[0] = 0.0;
  if (states > 1) start_mask[1] = 0.0;
  Var alpha = num::add(emissions(0), Var(std::move(start_mask)));
  for (std::size_t t = 1; t < frames; ++t) {
    alpha = num::add(num::logsumexp_groups(alpha, transitions), emissions(t));
  }
  std::vector<std::vector<std::size_t>> final_states{{states - 1}};
  if (states > 1) final_states[0].push_back(states - 2);
  const Var log_likelihood = num::logsumexp_groups(alpha, final_states);
  return num::reshape(num::scale(log_likelihood, -1.0), Shape{});
}

TokenSequence greedy_decode(const PosteriorGrid& g) {
  const Array& lp = g.values();
  TokenSequence out;
  std::size_t prev = kBlank;
  for (std::size_t t = 0; t < lp.rows(); ++t) {
    const auto row = lp.row(t);
    const auto best =
        static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != kBlank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct PrefixScore {
  double blank = kNegInf;
  double non_blank = kNegInf;
  double total() const { return log_add(blank, non_blank); }
};

using Beam = std::map<TokenSequence, PrefixScore>;

// Drops prefixes with no probability mass, then orders by total score.
std::vector<std::pair<TokenSequence, PrefixScore>> ranked(const Beam& beam) {
  std::vector<std::pair<TokenSequence, PrefixScore>> v;
  v.reserve(beam.size());
  for (const auto& entry : beam) {
    if (entry.second.total() > num::kLogZero) v.push_back(entry);
  }
  // std::map iteration is lexicographic; stable sort keeps that order for ties.
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.second.total() > b.second.total();
  });
  return v;
}

}  // namespace

std::vector<Hypothesis> prefix_beam_search(const PosteriorGrid& g, std::size_t beam_width) {
  if (beam_width == 0) throw ParameterError("beam must be at least 1");
  const Array& lp = g.values();
  const std::size_t vocab = lp.cols();

  std::vector<std::pair<TokenSequence, PrefixScore>> beam{{TokenSequence{}, PrefixScore{0.0, kNegInf}}};
  for (std::size_t t = 0; t < lp.rows(); ++t) {
    Beam next;
    for (const auto& [prefix, score] : beam) {
      const double total = score.total();
      auto& stay = next[prefix];
      stay.blank = log_add(stay.blank, total + lp(t, kBlank));
      for (std::size_t c = 1; c < vocab; ++c) {
        const double p = lp(t, c);
        TokenSequence extended = prefix;
        extended.push_back(c);
        auto& ext = next[extended];
        if (!prefix.empty() && prefix.back() == c) {
          ext.non_blank = log_add(ext.non_blank, score.blank + p);
          auto& same = next[prefix];
          same.non_blank = log_add(same.non_blank, score.non_blank + p);
        } else {
          ext.non_blank = log_add(ext.non_blank, total + p);
        }
      }
    }
    beam = ranked(next);
    if (beam.size() > beam_width) beam.resize(beam_width);
  }

  std::vector<Hypothesis> out;
  out.reserve(beam.size());
  for (auto& [prefix, score] : beam) out.push_back(Hypothesis{prefix, score.total()});
  return out;
}

std::vector<bool> blank_flags(const PosteriorGrid& g, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ParameterError("blank threshold must lie in (0, 1), got " + std::to_string(beta));
  }
  const Array& lp = g.values();
  std::vector<bool> flags(lp.rows());
  for (std::size_t t = 0; t < lp.rows(); ++t) flags[t] = std::exp(lp(t, kBlank)) > beta;
  return flags;
}

}  // namespace skf::ctc
