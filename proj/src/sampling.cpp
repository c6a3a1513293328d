#include "docmrt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace docmrt {

DocumentCost make_document_cost(CostKind doc_kind) {
  if (is_sentence_cost(doc_kind))
    throw std::invalid_argument("'" + std::string(to_string(doc_kind)) + "' is not a document-level cost");
  return [doc_kind](const DocumentView& doc) { return doc_cost(doc_kind, doc.hyps, doc.refs, doc.srcs); };
}

DocumentCost additive_document_cost() {
  return [](const DocumentView& doc) {
    double total = 0;
    for (double c : doc.sentence_costs) total += c;
    return total;
  };
}

DocumentCost constant_document_cost(double value) {
  return [value](const DocumentView&) { return value; };
}

RiskCost RiskCost::for_kind(CostKind kind) {
  if (is_sentence_cost(kind)) return {kind, additive_document_cost()};
  return {sentence_counterpart(kind), make_document_cost(kind)};
}

SampleSet make_sample_set(DocumentBatch batch, std::vector<std::vector<ScoredHypothesis>> grid,
                          CostKind sentence_kind) {
  if (grid.size() != batch.size()) throw std::invalid_argument("sample grid does not match batch size");
  SampleSet set;
  set.costs.resize(grid.size());
  for (std::size_t s = 0; s < grid.size(); ++s) {
    if (grid[s].size() != grid.front().size()) throw std::invalid_argument("ragged sample grid");
    for (const auto& h : grid[s])
      set.costs[s].push_back(seq_cost(sentence_kind, h.sentence, batch.references[s], &batch.sources[s]));
  }
  set.batch = std::move(batch);
  set.grid = std::move(grid);
  return set;
}

SampleSet draw_sample_set(const ModelParams& params, const DocumentBatch& batch, std::size_t num_samples,
                          double temperature, Rng& rng, int max_len, CostKind sentence_kind) {
  if (num_samples < 1) throw std::invalid_argument("need at least one sample per sentence");
  const SampleOptions opts{temperature, false};
  std::vector<std::vector<ScoredHypothesis>> grid(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    grid[s].reserve(num_samples);
    for (std::size_t n = 0; n < num_samples; ++n) grid[s].push_back(sample(params, batch.sources[s], opts, rng, max_len));
  }
  return make_sample_set(batch, std::move(grid), sentence_kind);
}

SampleSet order_samples(SampleSet set) {
  set.ranking.assign(set.num_sentences(), {});
  for (std::size_t s = 0; s < set.num_sentences(); ++s) {
    auto& rank = set.ranking[s];
    rank.resize(set.grid[s].size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    const auto& cost = set.costs[s];
    const auto& row = set.grid[s];
    std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      if (cost[a] != cost[b]) return cost[a] < cost[b];
      if (row[a].log_prob != row[b].log_prob) return row[a].log_prob > row[b].log_prob;
      return a < b;
    });
  }
  return set;
}

SampledDocument assemble_document(const SampleSet& set, std::vector<std::size_t> assignment,
                                  const DocumentCost& cost) {
  const std::size_t S = set.num_sentences();
  if (assignment.size() != S) throw std::invalid_argument("assignment length must equal the batch size");
  SampledDocument doc;
  doc.hyps.reserve(S);
  std::vector<double> sentence_costs(S);
  for (std::size_t s = 0; s < S; ++s) {
    const auto& h = set.grid[s].at(assignment[s]);
    doc.hyps.push_back(h.sentence);
    doc.log_prob += h.log_prob;
    sentence_costs[s] = set.costs[s][assignment[s]];
  }
  doc.cost = cost(DocumentView{doc.hyps, set.batch.references, set.batch.sources, sentence_costs});
  doc.assignment = std::move(assignment);
  return doc;
}

std::vector<SampledDocument> build_documents_ordered(const SampleSet& set, const DocumentCost& cost) {
  const SampleSet ordered_copy = set.ordered() ? SampleSet{} : order_samples(set);
  const SampleSet& src = set.ordered() ? set : ordered_copy;
  std::vector<SampledDocument> docs;
  docs.reserve(src.num_samples());
  for (std::size_t n = 0; n < src.num_samples(); ++n) {
    std::vector<std::size_t> assignment(src.num_sentences());
    for (std::size_t s = 0; s < src.num_sentences(); ++s) assignment[s] = src.ranking[s][n];
    docs.push_back(assemble_document(src, std::move(assignment), cost));
  }
  return docs;
}

std::vector<SampledDocument> build_documents_random(const SampleSet& set, const DocumentCost& cost, Rng& rng) {
  const std::size_t S = set.num_sentences();
  const std::size_t N = set.num_samples();
  std::vector<std::vector<std::size_t>> perms(S, std::vector<std::size_t>(N));
  for (auto& p : perms) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    // Fisher-Yates
    for (std::size_t i = N; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(p[i - 1], p[pick(rng)]);
    }
  }
  std::vector<SampledDocument> docs;
  docs.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<std::size_t> assignment(S);
    for (std::size_t s = 0; s < S; ++s) assignment[s] = perms[s][n];
    docs.push_back(assemble_document(set, std::move(assignment), cost));
  }
  return docs;
}

std::vector<WeightedDocument> enumerate_documents(const SampleSet& set, const DocumentCost& cost) {
  const std::size_t S = set.num_sentences();
  const std::size_t N = set.num_samples();
  const double count = std::pow(static_cast<double>(N), static_cast<double>(S));
  if (count > 1e6) throw std::invalid_argument("too many documents to enumerate (N^S > 1e6)");
  const double weight = 1.0 / count;
  std::vector<WeightedDocument> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> assignment(S, 0);
  while (true) {
    out.push_back({assemble_document(set, assignment, cost), weight});
    // Odometer increment, last sentence fastest.
    std::size_t s = S;
    while (s > 0) {
      --s;
      if (++assignment[s] < N) break;
      assignment[s] = 0;
      if (s == 0) return out;
    }
    if (S == 0) return out;
  }
}

}  // namespace docmrt
