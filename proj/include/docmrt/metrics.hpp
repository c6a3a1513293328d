#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docmrt/textcore.hpp"

namespace docmrt {

enum class MetricKind { Bleu, Ter, Gleu };

struct MetricScore {
  double value = 0.0;
  MetricKind kind = MetricKind::Bleu;
};

/// Cost selectors. Lower is better for every kind.
enum class CostKind {
  OneMinusSentBleu,
  OneMinusDocBleu,
  SentTer,
  DocTer,
  OneMinusSentGleu,
  OneMinusDocGleu,
};

bool is_sentence_cost(CostKind kind);
/// Sentence-level counterpart of a document cost (identity for sentence kinds).
CostKind sentence_counterpart(CostKind kind);
std::string_view to_string(CostKind kind);
CostKind parse_cost_kind(std::string_view name);
std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view name);

/// Clipped n-gram match and total counts, summed over however many
/// sentence pairs were added. Corpus BLEU and GLEU are functions of these.
struct NgramStats {
  explicit NgramStats(int max_n = 4);

  int max_n;
  std::vector<double> matches;
  std::vector<double> totals;
  double hyp_len = 0;
  double ref_len = 0;

  NgramStats& operator+=(const NgramStats& other);
};

NgramStats bleu_stats(const Sentence& hyp, const Sentence& ref, int max_n = 4);
/// GLEU statistics: matches are reference matches minus source-only overlap,
/// floored at zero per order.
NgramStats gleu_stats(const Sentence& hyp, const Sentence& src, const Sentence& ref, int max_n = 4);

/// Geometric mean of precisions times brevity penalty.
/// smoothed: p_n = (m+1)/(t+1) for every order.
/// unsmoothed: orders with zero totals are skipped; any zero precision gives 0.
double bleu_from_stats(const NgramStats& stats, bool smoothed);

MetricScore sentence_bleu_smoothed(const Sentence& hyp, const Sentence& ref, int max_n = 4);
MetricScore corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, int max_n = 4,
                        bool smoothed = false);

/// Word-level edit counts of one pair: Levenshtein edits remaining after the
/// greedy shifts, plus the number of shifts applied.
struct TerStats {
  int edits = 0;
  int shifts = 0;
  int ref_len = 0;
};

int levenshtein(const Sentence& a, const Sentence& b);
TerStats ter_stats(const Sentence& hyp, const Sentence& ref);
MetricScore ter(const Sentence& hyp, const Sentence& ref);
/// Pooled: sum of (edits + shifts) over sum of reference lengths.
MetricScore doc_ter(std::span<const Sentence> hyps, std::span<const Sentence> refs);

MetricScore gleu(std::span<const Sentence> hyps, std::span<const Sentence> sources, std::span<const Sentence> refs,
                 int max_n = 4, bool smoothed = false);

/// Sentence cost Δ(hyp, ref). GLEU kinds need `src`.
double seq_cost(CostKind kind, const Sentence& hyp, const Sentence& ref, const Sentence* src = nullptr);
/// Document cost D(Y, Y*). GLEU kinds need `srcs`.
double doc_cost(CostKind kind, std::span<const Sentence> hyps, std::span<const Sentence> refs,
                std::span<const Sentence> srcs = {});

}  // namespace docmrt
