#include "docmrt/batching.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "docmrt/model.hpp"

namespace docmrt {

std::string_view to_string(BatchingMode mode) { return mode == BatchingMode::Random ? "random" : "document"; }

BatchingMode parse_batching_mode(std::string_view name) {
  if (name == "random") return BatchingMode::Random;
  if (name == "document") return BatchingMode::Document;
  throw std::invalid_argument("unknown batching mode '" + std::string(name) + "'");
}

namespace {

template <class T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> make_batch_indices(const DocumentCorpus& corpus, BatchingMode mode,
                                                         std::size_t batch_size, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  Rng rng = make_rng(seed, {0xBA7C});
  std::vector<std::vector<std::size_t>> batches;
  if (mode == BatchingMode::Random) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_in_place(order, rng);
    for (std::size_t i = 0; i < order.size(); i += batch_size)
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  } else {
    for (auto [begin, end] : corpus.document_spans())
      for (std::size_t i = begin; i < end; i += batch_size) {
        std::vector<std::size_t> chunk(std::min(end, i + batch_size) - i);
        std::iota(chunk.begin(), chunk.end(), i);
        batches.push_back(std::move(chunk));
      }
    shuffle_in_place(batches, rng);
  }
  return batches;
}

std::vector<DocumentBatch> make_batches(const DocumentCorpus& corpus, BatchingMode mode, std::size_t batch_size,
                                        std::uint64_t seed) {
  std::vector<DocumentBatch> out;
  for (const auto& idx : make_batch_indices(corpus, mode, batch_size, seed)) {
    DocumentBatch b;
    b.doc_id = corpus.entries[idx.front()].doc_id;
    for (auto i : idx) {
      const auto& e = corpus.entries[i];
      b.sources.push_back(e.source);
      b.references.push_back(e.reference);
      if (e.doc_id != b.doc_id) b.doc_id = -1;
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace docmrt
