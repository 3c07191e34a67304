#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "skipformer/errors.hpp"
#include "skipformer/splitter.hpp"

using namespace skf;
using namespace skf::split;
using Idx = std::vector<std::size_t>;

namespace {

const std::vector<bool> kExample{true, false, false, true, true, false, true};

std::vector<bool> flags_from_bits(std::uint32_t bits, std::size_t n) {
  std::vector<bool> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = (bits >> i) & 1u;
  return f;
}

}  // namespace

TEST(ComputeSets, Example) {
  const IndexSets s = compute_sets(kExample);
  EXPECT_EQ(s.non_blank, (Idx{1, 2, 5}));
  EXPECT_EQ(s.blank, (Idx{0, 3, 4, 6}));
  EXPECT_EQ(s.left_blank, (Idx{0, 4}));
  EXPECT_EQ(s.right_blank, (Idx{3, 6}));
}

TEST(ComputeSets, Degenerate) {
  const IndexSets blank = compute_sets(std::vector<bool>(5, true));
  EXPECT_TRUE(blank.non_blank.empty());
  EXPECT_TRUE(blank.left_blank.empty());
  EXPECT_TRUE(blank.right_blank.empty());
  EXPECT_EQ(blank.blank.size(), 5u);

  const IndexSets speech = compute_sets(std::vector<bool>(5, false));
  EXPECT_TRUE(speech.blank.empty());
  EXPECT_TRUE(speech.left_blank.empty());
  EXPECT_TRUE(speech.right_blank.empty());
  EXPECT_EQ(speech.non_blank.size(), 5u);

  const IndexSets empty = compute_sets({});
  EXPECT_TRUE(empty.non_blank.empty());
  EXPECT_TRUE(empty.blank.empty());
}

TEST(AssignGroups, TableExamples) {
  const IndexSets s = compute_sets(kExample);
  const FrameGroups m2 = assign_groups(s, SplitMode::kMode2);
  EXPECT_EQ(m2.crucial, (Idx{1, 2, 5}));
  EXPECT_EQ(m2.trivial, (Idx{3, 6}));
  EXPECT_EQ(m2.ignoring, (Idx{0, 4}));

  const FrameGroups m1 = assign_groups(s, SplitMode::kMode1);
  EXPECT_EQ(m1.crucial, (Idx{1, 2, 5}));
  EXPECT_EQ(m1.trivial, (Idx{0, 3, 4, 6}));
  EXPECT_TRUE(m1.ignoring.empty());

  const FrameGroups m5 = assign_groups(s, SplitMode::kMode5);
  EXPECT_EQ(m5.crucial, (Idx{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_TRUE(m5.trivial.empty());
  EXPECT_TRUE(m5.ignoring.empty());
}

TEST(AssignGroups, MatchesBruteForceExhaustively) {
  for (std::size_t n = 0; n <= 10; ++n) {
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
      const auto flags = flags_from_bits(bits, n);
      const IndexSets s = compute_sets(flags);
      for (SplitMode m : kAllModes) {
        const FrameGroups g = assign_groups(s, m);
        const oracle::Groups o = oracle::split_groups(flags, mode_number(m));
        ASSERT_EQ(g.crucial, o.crucial) << "n=" << n << " bits=" << bits;
        ASSERT_EQ(g.trivial, o.trivial);
        ASSERT_EQ(g.ignoring, o.ignoring);
      }
    }
  }
}

TEST(AssignGroups, StructuralProperties) {
  std::mt19937_64 rng(1);
  auto subset = [](const Idx& a, const Idx& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<bool> flags(1 + rng() % 30);
    for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = rng() % 3 != 0;
    const IndexSets s = compute_sets(flags);
    std::vector<FrameGroups> g;
    for (SplitMode m : kAllModes) g.push_back(assign_groups(s, m));
    EXPECT_TRUE(g[0].ignoring.empty());
    for (int k : {2, 3, 4}) EXPECT_TRUE(g[k].trivial.empty());
    EXPECT_EQ(g[0].crucial, g[1].crucial);
    EXPECT_TRUE(subset(g[1].crucial, g[2].crucial));
    EXPECT_TRUE(subset(g[1].crucial, g[3].crucial));
    EXPECT_TRUE(subset(g[2].crucial, g[4].crucial));
    EXPECT_TRUE(subset(g[3].crucial, g[4].crucial));
    EXPECT_TRUE(subset(s.left_blank, s.blank));
    EXPECT_TRUE(subset(s.right_blank, s.blank));
  }
}

TEST(SplitMode, Conversion) {
  EXPECT_EQ(mode_from_int(2), SplitMode::kMode2);
  EXPECT_EQ(mode_number(SplitMode::kMode4), 4);
  EXPECT_EQ(kDefaultMode, SplitMode::kMode2);
  EXPECT_THROW(mode_from_int(0), ParameterError);
  EXPECT_THROW(mode_from_int(6), ParameterError);
}

TEST(Split, GathersRows) {
  num::Array rows(num::Shape{7, 2});
  for (std::size_t r = 0; r < 7; ++r) rows(r, 0) = rows(r, 1) = static_cast<double>(r);
  const auto h1 = encoder::with_identity_index(num::Var(rows));
  const SplitResult r = split::split(h1, assign_groups(compute_sets(kExample), SplitMode::kMode2));
  EXPECT_EQ(r.crucial.orig_index, (Idx{1, 2, 5}));
  EXPECT_EQ(r.trivial.orig_index, (Idx{3, 6}));
  EXPECT_EQ(r.ignored, (Idx{0, 4}));
  EXPECT_EQ(r.crucial.frames.value()(2, 0), 5.0);
  EXPECT_EQ(r.trivial.frames.value()(0, 1), 3.0);
}

TEST(Split, CarriesSourceOrigIndex) {
  const encoder::EncodedSequence h{num::Var(num::Array(num::Shape{3, 1})), {4, 8, 9}};
  FrameGroups g;
  g.crucial = {0, 2};
  g.trivial = {1};
  const SplitResult r = split::split(h, g);
  EXPECT_EQ(r.crucial.orig_index, (Idx{4, 9}));
  EXPECT_EQ(r.trivial.orig_index, (Idx{8}));
}

TEST(Split, EmptyCrucialAndRangeErrors) {
  const auto h1 = encoder::with_identity_index(num::Var(num::Array(num::Shape{4, 2})));
  const SplitResult r = split::split(h1, assign_groups(compute_sets(std::vector<bool>(4, true)),
                                                SplitMode::kMode2));
  EXPECT_EQ(r.crucial.length(), 0u);
  EXPECT_EQ(r.crucial.frames.rows(), 0u);
  FrameGroups bad;
  bad.crucial = {0, 4};
  EXPECT_THROW(split::split(h1, bad), ContractError);
}

TEST(Split, GradientFlowsOnlyToCrucialRows) {
  num::Var h(num::Array(num::Shape{7, 3}, 1.0), true);
  num::Tape tape;
  num::TapeScope scope(tape);
  const SplitResult r = split::split(encoder::with_identity_index(h),
                              assign_groups(compute_sets(kExample), SplitMode::kMode2));
  tape.backward(num::sum(r.crucial.frames));
  const num::Array& g = h.grad();
  for (std::size_t row = 0; row < 7; ++row) {
    const double want = (row == 1 || row == 2 || row == 5) ? 1.0 : 0.0;
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(g(row, c), want);
  }
}
