#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "skipformer/decoder.hpp"
#include "skipformer/errors.hpp"
#include "skipformer/numerics/grad_check.hpp"
#include "skipformer/numerics/optim.hpp"

using namespace skf;
using namespace skf::decoder;
using num::Array;
using num::Shape;
using num::Var;

namespace {

encoder::EncodedSequence random_encoding(std::size_t L, std::size_t D, std::mt19937_64& rng,
                                         bool grad = false) {
  return encoder::with_identity_index(Var(random_normal({L, D}, 1.0, rng), grad));
}

std::vector<Var> leaves_of(DecoderParams& p) {
  ParamList params;
  p.collect(params, "dec");
  std::vector<Var> out;
  for (auto& np : params) out.push_back(np.param->value);
  return out;
}

}  // namespace

TEST(Decoder, ReservedSymbols) {
  std::mt19937_64 rng(1);
  const DecoderParams p(7, 8, 2, 16, 1, rng);
  EXPECT_EQ(p.sos(), 7u);
  EXPECT_EQ(p.eos(), 8u);
  EXPECT_EQ(p.output_vocab(), 9u);
  EXPECT_EQ(p.embedding.shape(), (Shape{9, 8}));
}

TEST(AedLoss, ZeroOutputHeadGivesLogVocab) {
  std::mt19937_64 rng(2);
  DecoderParams p(6, 8, 2, 16, 2, rng);
  p.output.zero_out();
  const auto enc = random_encoding(5, 8, rng);
  EXPECT_NEAR(aed_loss(enc, {1, 4, 2}, p).item(), std::log(8.0), 1e-12);
}

TEST(AedLoss, SingleTokenCoversTwoPositions) {
  std::mt19937_64 rng(3);
  const DecoderParams p(5, 8, 2, 16, 1, rng);
  const auto enc = random_encoding(4, 8, rng);
  const std::vector<std::size_t> in{p.sos(), 3};
  EXPECT_EQ(decoder_logits(enc, in, p).shape(), (Shape{2, 7}));
  // Mean cross-entropy over [3, eos] equals minus the average log-likelihood.
  EXPECT_NEAR(aed_loss(enc, {3}, p).item(), -sequence_log_likelihood(enc, {3}, p) / 2.0, 1e-12);
}

TEST(AedLoss, RejectsEmptyAndOutOfRangeTargets) {
  std::mt19937_64 rng(4);
  const DecoderParams p(5, 8, 2, 16, 1, rng);
  const auto enc = random_encoding(3, 8, rng);
  EXPECT_THROW(aed_loss(enc, {}, p), ContractError);
  EXPECT_THROW(aed_loss(enc, {5}, p), ContractError);
  EXPECT_THROW(aed_loss(enc, {0}, p), ContractError);
}

TEST(AedLoss, GradientCheck) {
  std::mt19937_64 rng(5);
  DecoderParams p(4, 4, 2, 8, 1, rng);
  const auto enc = random_encoding(3, 4, rng, true);
  auto leaves = leaves_of(p);
  leaves.push_back(enc.frames);
  const auto report = num::grad_check_leaves([&] { return aed_loss(enc, {1, 3, 3}, p); }, leaves, {1e-5, 1e-5});
  EXPECT_LE(report.max_rel_error, 1e-4) << "leaf " << report.worst_leaf;
}

TEST(Decoder, SelfAttentionIsCausal) {
  std::mt19937_64 rng(6);
  const DecoderParams p(6, 8, 2, 16, 2, rng);
  const auto enc = random_encoding(4, 8, rng);
  const std::vector<std::size_t> a{p.sos(), 1, 2, 3, 4};
  std::vector<std::size_t> b = a;
  b[3] = 5;
  const Array la = decoder_logits(enc, a, p).value();
  const Array lb = decoder_logits(enc, b, p).value();
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < la.cols(); ++c) EXPECT_EQ(la(r, c), lb(r, c));
  }
  bool later_changed = false;
  for (std::size_t c = 0; c < la.cols(); ++c) later_changed |= la(3, c) != lb(3, c);
  EXPECT_TRUE(later_changed);
}

TEST(AedLoss, DecreasesAfterOneAdamStep) {
  std::mt19937_64 rng(7);
  DecoderParams p(5, 8, 2, 16, 1, rng);
  const auto enc = random_encoding(6, 8, rng);
  const ctc::TokenSequence y{2, 4, 1};
  const double before = aed_loss(enc, y, p).item();
  {
    num::Tape tape;
    num::TapeScope scope(tape);
    tape.backward(aed_loss(enc, y, p));
  }
  ParamList params;
  p.collect(params, "dec");
  for (auto& np : params) {
    const Array g = np.param->value.has_grad() ? np.param->value.grad()
                                               : Array(np.param->shape());
    num::adam_step(*np.param, g, 1e-3, 0.9, 0.98, 1e-9);
    np.param->value.zero_grad();
  }
  EXPECT_LT(aed_loss(enc, y, p).item(), before);
}

TEST(Rescore, SingletonReturnedUnchanged) {
  std::mt19937_64 rng(8);
  const DecoderParams p(5, 8, 2, 16, 1, rng);
  const auto enc = random_encoding(3, 8, rng);
  const std::vector<ctc::Hypothesis> one{{{2, 2, 3}, -1.0}};
  EXPECT_EQ(rescore(enc, one, p, 0.5), (ctc::TokenSequence{2, 2, 3}));
  EXPECT_THROW(rescore(enc, {}, p, 0.5), ContractError);
}

TEST(Rescore, ScoresAreDecoderPlusWeightedCtc) {
  std::mt19937_64 rng(9);
  const DecoderParams p(5, 4, 2, 8, 1, rng);
  const auto enc = random_encoding(5, 4, rng);
  const std::vector<ctc::Hypothesis> hyps{{{1, 2}, -0.7}, {{1}, -1.1}, {{3, 4, 4}, -2.5}, {{}, -3.0}};
  for (double w : {0.0, 0.3, 1.0}) {
    const RescoreResult r = rescore_scores(enc, hyps, p, w);
    ASSERT_EQ(r.scores.size(), hyps.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      // Teacher-forced cross-entropy is the per-position mean of -log p.
      const double ll = hyps[i].tokens.empty()
                            ? sequence_log_likelihood(enc, hyps[i].tokens, p)
                            : -aed_loss(enc, hyps[i].tokens, p).item() *
                                  static_cast<double>(hyps[i].tokens.size() + 1);
      EXPECT_NEAR(r.scores[i], ll + w * hyps[i].log_score, 1e-9);
      if (r.scores[i] > r.scores[best]) best = i;
    }
    EXPECT_EQ(r.best, best);
  }
}

TEST(Rescore, WeightZeroPicksDecoderArgmax) {
  std::mt19937_64 rng(10);
  const DecoderParams p(6, 8, 2, 16, 1, rng);
  const auto enc = random_encoding(4, 8, rng);
  const std::vector<ctc::Hypothesis> hyps{{{1}, 0.0}, {{2, 3}, -50.0}, {{5}, -9.0}};
  std::size_t best = 0;
  for (std::size_t i = 1; i < hyps.size(); ++i) {
    if (sequence_log_likelihood(enc, hyps[i].tokens, p) >
        sequence_log_likelihood(enc, hyps[best].tokens, p)) {
      best = i;
    }
  }
  EXPECT_EQ(rescore(enc, hyps, p, 0.0), hyps[best].tokens);
}

TEST(Rescore, OrderInvariantAndTiesGoLow) {
  std::mt19937_64 rng(11);
  const DecoderParams p(6, 8, 2, 16, 1, rng);
  const auto enc = random_encoding(4, 8, rng);
  std::vector<ctc::Hypothesis> hyps{{{1, 2}, -1.0}, {{4}, -2.0}, {{3, 3, 5}, -0.5}};
  const auto ref = rescore(enc, hyps, p, 0.5);
  std::reverse(hyps.begin(), hyps.end());
  EXPECT_EQ(rescore(enc, hyps, p, 0.5), ref);

  const std::vector<ctc::Hypothesis> tie{{{2}, -1.0}, {{2}, -1.0}};
  EXPECT_EQ(rescore_scores(enc, tie, p, 0.5).best, 0u);
}
