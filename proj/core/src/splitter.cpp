#include "skipformer/splitter.hpp"

#include <algorithm>
#include <iterator>

#include "skipformer/errors.hpp"

namespace skf::split {

using encoder::EncodedSequence;
using Indices = std::vector<std::size_t>;

SplitMode mode_from_int(int m) {
  if (m < 1 || m > 5) throw ParameterError("split mode must be 1..5, got " + std::to_string(m));
  return static_cast<SplitMode>(m);
}

int mode_number(SplitMode m) { return static_cast<int>(m); }

IndexSets compute_sets(const std::vector<bool>& flags) {
  IndexSets s;
  const std::size_t n = flags.size();
  for (std::size_t t = 0; t < n; ++t) (flags[t] ? s.blank : s.non_blank).push_back(t);

  // Sweep once in each direction tracking the closest blank seen so far.
  std::vector<bool> in_left(n, false);
  std::vector<bool> in_right(n, false);
  std::ptrdiff_t last_blank = -1;
  for (std::size_t t = 0; t < n; ++t) {
    if (flags[t]) {
      last_blank = static_cast<std::ptrdiff_t>(t);
    } else if (last_blank >= 0) {
      in_left[static_cast<std::size_t>(last_blank)] = true;
    }
  }
  std::size_t next_blank = n;
  for (std::size_t t = n; t-- > 0;) {
    if (flags[t]) {
      next_blank = t;
    } else if (next_blank < n) {
      in_right[next_blank] = true;
    }
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (in_left[t]) s.left_blank.push_back(t);
    if (in_right[t]) s.right_blank.push_back(t);
  }
  return s;
}

namespace {

Indices set_union(const Indices& a, const Indices& b) {
  Indices out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Indices set_minus(const Indices& a, const Indices& b) {
  Indices out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

FrameGroups assign_groups(const IndexSets& sets, SplitMode mode) {
  FrameGroups g;
  g.sets = sets;
  const Indices& c = sets.non_blank;
  const Indices& b = sets.blank;
  const Indices& l = sets.left_blank;
  const Indices& r = sets.right_blank;
  switch (mode) {
    case SplitMode::kMode1:
      g.crucial = c;
      g.trivial = b;
      break;
    case SplitMode::kMode2:
      g.crucial = c;
      g.trivial = r;
      g.ignoring = set_minus(b, r);
      break;
    case SplitMode::kMode3:
      g.crucial = set_union(c, r);
      g.ignoring = set_minus(b, r);
      break;
    case SplitMode::kMode4:
      g.crucial = set_union(l, c);
      g.ignoring = set_minus(b, l);
      break;
    case SplitMode::kMode5:
      g.crucial = set_union(set_union(l, c), r);
      g.ignoring = set_minus(set_minus(b, r), l);
      break;
  }
  return g;
}

FrameGroups all_crucial(std::size_t length) {
  FrameGroups g;
  g.crucial.resize(length);
  for (std::size_t i = 0; i < length; ++i) g.crucial[i] = i;
  g.sets.non_blank = g.crucial;
  return g;
}

namespace {

EncodedSequence gather(const EncodedSequence& h1, const Indices& idx) {
  EncodedSequence out;
  out.frames = num::gather_rows(h1.frames, idx);
  out.orig_index.reserve(idx.size());
  for (std::size_t i : idx) out.orig_index.push_back(h1.orig_index[i]);
  return out;
}

}  // namespace

SplitResult split(const EncodedSequence& h1, const FrameGroups& groups) {
  const std::size_t n = h1.length();
  for (const Indices* part : {&groups.crucial, &groups.trivial, &groups.ignoring}) {
    if (!part->empty() && part->back() >= n) {
      throw ContractError("split: frame index " + std::to_string(part->back()) +
                          " out of range for sequence of length " + std::to_string(n));
    }
  }
  SplitResult r;
  r.crucial = gather(h1, groups.crucial);
  r.trivial = gather(h1, groups.trivial);
  r.ignored.reserve(groups.ignoring.size());
  for (std::size_t i : groups.ignoring) r.ignored.push_back(h1.orig_index[i]);
  return r;
}

}  // namespace skf::split
