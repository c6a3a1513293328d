#include "docmrt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace docmrt {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw std::invalid_argument("empty hypothesis list");
}

double clipped_matches(const NgramCounts& hyp, const NgramCounts& ref) {
  double m = 0;
  for (const auto& [gram, count] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) m += std::min(count, it->second);
  }
  return m;
}

double brevity_penalty(double hyp_len, double ref_len) {
  if (hyp_len <= 0) return ref_len > 0 ? 0.0 : 1.0;
  return std::min(1.0, std::exp(1.0 - ref_len / hyp_len));
}

}  // namespace

bool is_sentence_cost(CostKind kind) {
  switch (kind) {
    case CostKind::OneMinusSentBleu:
    case CostKind::SentTer:
    case CostKind::OneMinusSentGleu:
      return true;
    default:
      return false;
  }
}

CostKind sentence_counterpart(CostKind kind) {
  switch (kind) {
    case CostKind::OneMinusDocBleu: return CostKind::OneMinusSentBleu;
    case CostKind::DocTer: return CostKind::SentTer;
    case CostKind::OneMinusDocGleu: return CostKind::OneMinusSentGleu;
    default: return kind;
  }
}

std::string_view to_string(CostKind kind) {
  switch (kind) {
    case CostKind::OneMinusSentBleu: return "one_minus_sbleu";
    case CostKind::OneMinusDocBleu: return "one_minus_docbleu";
    case CostKind::SentTer: return "sent_ter";
    case CostKind::DocTer: return "doc_ter";
    case CostKind::OneMinusSentGleu: return "one_minus_sent_gleu";
    case CostKind::OneMinusDocGleu: return "one_minus_doc_gleu";
  }
  return "?";
}

CostKind parse_cost_kind(std::string_view name) {
  for (auto k : {CostKind::OneMinusSentBleu, CostKind::OneMinusDocBleu, CostKind::SentTer, CostKind::DocTer,
                 CostKind::OneMinusSentGleu, CostKind::OneMinusDocGleu})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown cost kind '" + std::string(name) + "'");
}

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Bleu: return "bleu";
    case MetricKind::Ter: return "ter";
    case MetricKind::Gleu: return "gleu";
  }
  return "?";
}

MetricKind parse_metric_kind(std::string_view name) {
  if (name == "bleu") return MetricKind::Bleu;
  if (name == "ter") return MetricKind::Ter;
  if (name == "gleu") return MetricKind::Gleu;
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

NgramStats::NgramStats(int n) : max_n(n), matches(static_cast<std::size_t>(n), 0.0), totals(static_cast<std::size_t>(n), 0.0) {
  if (n < 1) throw std::invalid_argument("max_n must be >= 1");
}

NgramStats& NgramStats::operator+=(const NgramStats& other) {
  if (other.max_n != max_n) throw std::invalid_argument("n-gram order mismatch");
  for (std::size_t i = 0; i < matches.size(); ++i) {
    matches[i] += other.matches[i];
    totals[i] += other.totals[i];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

NgramStats bleu_stats(const Sentence& hyp, const Sentence& ref, int max_n) {
  NgramStats st(max_n);
  for (int n = 1; n <= max_n; ++n) {
    const auto i = static_cast<std::size_t>(n - 1);
    st.matches[i] = clipped_matches(ngrams(hyp, n), ngrams(ref, n));
    st.totals[i] = static_cast<double>(std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(hyp.size()) - n + 1, 0));
  }
  st.hyp_len = static_cast<double>(hyp.size());
  st.ref_len = static_cast<double>(ref.size());
  return st;
}

NgramStats gleu_stats(const Sentence& hyp, const Sentence& src, const Sentence& ref, int max_n) {
  NgramStats st(max_n);
  for (int n = 1; n <= max_n; ++n) {
    const auto i = static_cast<std::size_t>(n - 1);
    const auto h = ngrams(hyp, n);
    const auto r = ngrams(ref, n);
    const auto s = ngrams(src, n);
    double penalty = 0;
    for (const auto& [gram, count] : h) {
      auto si = s.find(gram);
      if (si == s.end()) continue;
      auto ri = r.find(gram);
      const int source_only = std::max(si->second - (ri == r.end() ? 0 : ri->second), 0);
      penalty += std::min(count, source_only);
    }
    st.matches[i] = std::max(clipped_matches(h, r) - penalty, 0.0);
    st.totals[i] = static_cast<double>(std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(hyp.size()) - n + 1, 0));
  }
  st.hyp_len = static_cast<double>(hyp.size());
  st.ref_len = static_cast<double>(ref.size());
  return st;
}

double bleu_from_stats(const NgramStats& st, bool smoothed) {
  if (st.hyp_len <= 0) return st.ref_len > 0 ? 0.0 : 1.0;
  double log_sum = 0;
  int orders = 0;
  for (std::size_t i = 0; i < st.matches.size(); ++i) {
    double p;
    if (smoothed) {
      p = (st.matches[i] + 1.0) / (st.totals[i] + 1.0);
    } else {
      if (st.totals[i] <= 0) continue;
      if (st.matches[i] <= 0) return 0.0;
      p = st.matches[i] / st.totals[i];
    }
    log_sum += std::log(p);
    ++orders;
  }
  if (orders == 0) return 0.0;
  return std::exp(log_sum / orders) * brevity_penalty(st.hyp_len, st.ref_len);
}

MetricScore sentence_bleu_smoothed(const Sentence& hyp, const Sentence& ref, int max_n) {
  return {bleu_from_stats(bleu_stats(hyp, ref, max_n), true), MetricKind::Bleu};
}

MetricScore corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, int max_n, bool smoothed) {
  check_aligned(hyps.size(), refs.size());
  NgramStats total(max_n);
  for (std::size_t i = 0; i < hyps.size(); ++i) total += bleu_stats(hyps[i], refs[i], max_n);
  return {bleu_from_stats(total, smoothed), MetricKind::Bleu};
}

MetricScore ter(const Sentence& hyp, const Sentence& ref) {
  if (ref.empty()) throw std::invalid_argument("TER undefined for an empty reference");
  const auto st = ter_stats(hyp, ref);
  return {static_cast<double>(st.edits + st.shifts) / st.ref_len, MetricKind::Ter};
}

MetricScore doc_ter(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  check_aligned(hyps.size(), refs.size());
  double edits = 0;
  double len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (refs[i].empty()) throw std::invalid_argument("TER undefined for an empty reference");
    const auto st = ter_stats(hyps[i], refs[i]);
    edits += st.edits + st.shifts;
    len += st.ref_len;
  }
  return {edits / len, MetricKind::Ter};
}

MetricScore gleu(std::span<const Sentence> hyps, std::span<const Sentence> sources, std::span<const Sentence> refs,
                 int max_n, bool smoothed) {
  check_aligned(hyps.size(), refs.size());
  check_aligned(hyps.size(), sources.size());
  NgramStats total(max_n);
  for (std::size_t i = 0; i < hyps.size(); ++i) total += gleu_stats(hyps[i], sources[i], refs[i], max_n);
  return {bleu_from_stats(total, smoothed), MetricKind::Gleu};
}

double seq_cost(CostKind kind, const Sentence& hyp, const Sentence& ref, const Sentence* src) {
  switch (kind) {
    case CostKind::OneMinusSentBleu:
      return 1.0 - sentence_bleu_smoothed(hyp, ref).value;
    case CostKind::SentTer:
      return ter(hyp, ref).value;
    case CostKind::OneMinusSentGleu: {
      if (!src) throw std::invalid_argument("sentence GLEU cost needs the source sentence");
      return 1.0 - bleu_from_stats(gleu_stats(hyp, *src, ref, 4), true);
    }
    default:
      throw std::invalid_argument("seq_cost: '" + std::string(to_string(kind)) + "' is a document-level cost");
  }
}

double doc_cost(CostKind kind, std::span<const Sentence> hyps, std::span<const Sentence> refs,
                std::span<const Sentence> srcs) {
  switch (kind) {
    case CostKind::OneMinusDocBleu:
      return 1.0 - corpus_bleu(hyps, refs, 4, false).value;
    case CostKind::DocTer:
      return doc_ter(hyps, refs).value;
    case CostKind::OneMinusDocGleu:
      if (srcs.size() != hyps.size()) throw std::invalid_argument("document GLEU cost needs aligned sources");
      return 1.0 - gleu(hyps, srcs, refs, 4, false).value;
    default:
      throw std::invalid_argument("doc_cost: '" + std::string(to_string(kind)) + "' is a sentence-level cost");
  }
}

}  // namespace docmrt
