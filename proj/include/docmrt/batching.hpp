#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "docmrt/textcore.hpp"

namespace docmrt {

enum class BatchingMode {
  Random,    // global shuffle, then chunks of S (pseudo-documents)
  Document,  // chunks of at most S taken inside single documents
};

std::string_view to_string(BatchingMode mode);
BatchingMode parse_batching_mode(std::string_view name);

/// Partitions the corpus into batches; every entry lands in exactly one batch.
/// The final short chunk is kept. Document-mode batch order is shuffled too.
std::vector<DocumentBatch> make_batches(const DocumentCorpus& corpus, BatchingMode mode, std::size_t batch_size,
                                        std::uint64_t seed);

/// Same partition as make_batches, expressed as corpus entry indices.
std::vector<std::vector<std::size_t>> make_batch_indices(const DocumentCorpus& corpus, BatchingMode mode,
                                                         std::size_t batch_size, std::uint64_t seed);

}  // namespace docmrt
