#pragma once

#include <functional>
#include <span>
#include <vector>

#include "docmrt/metrics.hpp"
#include "docmrt/model.hpp"
#include "docmrt/textcore.hpp"

namespace docmrt {

/// One candidate document as seen by a document cost.
struct DocumentView {
  std::span<const Sentence> hyps;
  std::span<const Sentence> refs;
  std::span<const Sentence> srcs;
  /// Sentence costs of the member hypotheses, aligned with `hyps`.
  std::span<const double> sentence_costs;
};

using DocumentCost = std::function<double(const DocumentView&)>;

/// D from a document-level CostKind.
DocumentCost make_document_cost(CostKind doc_kind);
/// D = sum of member sentence costs.
DocumentCost additive_document_cost();
DocumentCost constant_document_cost(double value);

/// Pairs the sentence cost (Δ, also the ordering key) with the document cost D.
struct RiskCost {
  CostKind sentence_kind = CostKind::OneMinusSentBleu;
  DocumentCost document;

  /// For a document kind: its sentence counterpart plus make_document_cost.
  /// For a sentence kind: D is the additive sum of sentence costs.
  static RiskCost for_kind(CostKind kind);
};

/// N scored samples for each of the S sentences of a batch.
struct SampleSet {
  DocumentBatch batch;
  std::vector<std::vector<ScoredHypothesis>> grid;  // [s][n]
  std::vector<std::vector<double>> costs;           // Δ_n^(s)
  /// Per sentence, sample indices best-first; empty until order_samples.
  std::vector<std::vector<std::size_t>> ranking;

  std::size_t num_sentences() const { return grid.size(); }
  std::size_t num_samples() const { return grid.empty() ? 0 : grid.front().size(); }
  bool ordered() const { return !ranking.empty(); }
};

SampleSet draw_sample_set(const ModelParams& params, const DocumentBatch& batch, std::size_t num_samples,
                          double temperature, Rng& rng, int max_len, CostKind sentence_kind);

/// Builds a SampleSet from given hypotheses, scoring them with `sentence_kind`.
SampleSet make_sample_set(DocumentBatch batch, std::vector<std::vector<ScoredHypothesis>> grid,
                          CostKind sentence_kind);

/// Ascending cost; ties by descending log_prob, then by sample index.
SampleSet order_samples(SampleSet set);

struct SampledDocument {
  std::vector<std::size_t> assignment;  // sample index per sentence (0-based)
  std::vector<Sentence> hyps;
  double log_prob = 0.0;  // sum of member log-probabilities
  double cost = 0.0;      // D(Y, Y*)
};

SampledDocument assemble_document(const SampleSet& set, std::vector<std::size_t> assignment,
                                  const DocumentCost& cost);

/// Document n takes the rank-n sample of every sentence.
std::vector<SampledDocument> build_documents_ordered(const SampleSet& set, const DocumentCost& cost);

/// Each sentence's samples are dealt to the N documents by an independent
/// uniform random permutation.
std::vector<SampledDocument> build_documents_random(const SampleSet& set, const DocumentCost& cost, Rng& rng);

struct WeightedDocument {
  SampledDocument document;
  double weight = 0.0;
};

/// All N^S assignments, each with weight 1/N^S. Throws past 1e6 documents.
std::vector<WeightedDocument> enumerate_documents(const SampleSet& set, const DocumentCost& cost);

}  // namespace docmrt
