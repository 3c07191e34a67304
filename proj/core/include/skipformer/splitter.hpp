#pragma once

#include <string>
#include <vector>

#include "skipformer/encoder.hpp"

namespace skf::split {

// Which of the five frame-routing schemes to use:
//   mode | crucial   | trivial | ignoring
//   1    | C         | B       | {}
//   2    | C         | R       | B \ R
//   3    | C u R     | {}      | B \ R
//   4    | L u C     | {}      | B \ L
//   5    | L u C u R | {}      | B \ R \ L
// C: non-blank frames; B: blank frames; L / R: nearest blank to the left /
// right of some non-blank frame.
enum class SplitMode { kMode1 = 1, kMode2 = 2, kMode3 = 3, kMode4 = 4, kMode5 = 5 };

inline constexpr SplitMode kDefaultMode = SplitMode::kMode2;
inline constexpr SplitMode kAllModes[] = {SplitMode::kMode1, SplitMode::kMode2,
                                          SplitMode::kMode3, SplitMode::kMode4,
                                          SplitMode::kMode5};

SplitMode mode_from_int(int m);
int mode_number(SplitMode m);

// All index lists are sorted ascending without duplicates.
struct IndexSets {
  std::vector<std::size_t> non_blank;     // C
  std::vector<std::size_t> blank;         // B
  std::vector<std::size_t> left_blank;    // L
  std::vector<std::size_t> right_blank;   // R
};

struct FrameGroups {
  IndexSets sets;
  std::vector<std::size_t> crucial;
  std::vector<std::size_t> trivial;
  std::vector<std::size_t> ignoring;

  std::size_t length() const { return sets.non_blank.size() + sets.blank.size(); }
};

// flags[t] is true when frame t was classified blank.
IndexSets compute_sets(const std::vector<bool>& flags);
FrameGroups assign_groups(const IndexSets& sets, SplitMode mode);

// Every frame crucial; used when splitting must be bypassed.
FrameGroups all_crucial(std::size_t length);

struct SplitResult {
  encoder::EncodedSequence crucial;
  encoder::EncodedSequence trivial;
  std::vector<std::size_t> ignored;  // original indices of dropped frames
};

// Gathers rows of h1 into the crucial and trivial subsequences. Group indices
// are positions in h1; the outputs carry h1's orig_index values.
SplitResult split(const encoder::EncodedSequence& h1, const FrameGroups& groups);

}  // namespace skf::split
