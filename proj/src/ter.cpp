// Translation edit rate: word-level Levenshtein distance plus greedy block
// shifts. A shift moves a hypothesis block of at most kMaxShiftSize words to
// a position where that block matches the reference; shifts are taken one at
// a time, always the one with the largest edit reduction, until none helps.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "docmrt/metrics.hpp"

namespace docmrt {

namespace {

constexpr std::size_t kMaxShiftSize = 10;

using Table = std::vector<std::vector<int>>;

Table edit_table(const Sentence& hyp, const Sentence& ref) {
  Table d(hyp.size() + 1, std::vector<int>(ref.size() + 1, 0));
  for (std::size_t i = 0; i <= hyp.size(); ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= ref.size(); ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= hyp.size(); ++i)
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const int sub = d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  return d;
}

// For every reference index, the hypothesis index it is aligned to under one
// optimal edit path (insertions map to the hypothesis slot they precede).
std::vector<std::size_t> ref_to_hyp_alignment(const Sentence& hyp, const Sentence& ref, const Table& d) {
  std::vector<std::size_t> align(ref.size(), 0);
  std::size_t i = hyp.size();
  std::size_t j = ref.size();
  while (j > 0) {
    if (i > 0 && d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
      align[j - 1] = i - 1;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      --i;
    } else {
      align[j - 1] = i;
      --j;
    }
  }
  return align;
}

Sentence apply_shift(const Sentence& s, std::size_t start, std::size_t len, std::size_t dest) {
  Sentence rest;
  rest.reserve(s.size());
  rest.insert(rest.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(start));
  rest.insert(rest.end(), s.begin() + static_cast<std::ptrdiff_t>(start + len), s.end());
  Sentence out(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(dest));
  out.insert(out.end(), s.begin() + static_cast<std::ptrdiff_t>(start),
             s.begin() + static_cast<std::ptrdiff_t>(start + len));
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(dest), rest.end());
  return out;
}

}  // namespace

int levenshtein(const Sentence& a, const Sentence& b) { return edit_table(a, b)[a.size()][b.size()]; }

TerStats ter_stats(const Sentence& hyp, const Sentence& ref) {
  TerStats st;
  st.ref_len = static_cast<int>(ref.size());
  Sentence cur = hyp;
  auto table = edit_table(cur, ref);
  int edits = table[cur.size()][ref.size()];

  while (edits > 0 && !cur.empty()) {
    const auto align = ref_to_hyp_alignment(cur, ref, table);
    int best_gain = 0;
    Sentence best;
    const std::size_t max_len = std::min(kMaxShiftSize, cur.size());
    for (std::size_t len = max_len; len >= 1; --len) {
      for (std::size_t i = 0; i + len <= cur.size(); ++i) {
        for (std::size_t j = 0; j + len <= ref.size(); ++j) {
          if (!std::equal(cur.begin() + static_cast<std::ptrdiff_t>(i),
                          cur.begin() + static_cast<std::ptrdiff_t>(i + len),
                          ref.begin() + static_cast<std::ptrdiff_t>(j)))
            continue;
          // Destinations: the reference index itself, and the slot the
          // alignment maps it to (expressed in post-removal coordinates).
          const std::size_t limit = cur.size() - len;
          std::size_t mapped = align[j];
          if (mapped > i && mapped < i + len) continue;
          if (mapped >= i + len) mapped -= len;
          for (std::size_t dest : {std::min(j, limit), std::min(mapped, limit)}) {
            if (dest == i) continue;
            Sentence moved = apply_shift(cur, i, len, dest);
            const int gain = edits - levenshtein(moved, ref);
            if (gain > best_gain) {
              best_gain = gain;
              best = std::move(moved);
            }
          }
        }
      }
    }
    if (best_gain <= 0) break;
    cur = std::move(best);
    table = edit_table(cur, ref);
    edits = table[cur.size()][ref.size()];
    ++st.shifts;
  }
  st.edits = edits;
  return st;
}

}  // namespace docmrt
