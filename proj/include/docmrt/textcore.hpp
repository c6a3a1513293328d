#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace docmrt {

using TokenId = std::int32_t;

/// Token ids of one sentence. BOS/EOS are never stored; the model adds them.
using Sentence = std::vector<TokenId>;

/// Multiset of contiguous n-grams with their multiplicities.
using NgramCounts = std::map<std::vector<TokenId>, int>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;

class Vocabulary {
 public:
  Vocabulary();

  /// Appends a surface token; returns its id. Existing tokens keep their id.
  TokenId add(std::string_view token);

  TokenId id(std::string_view token) const;  // kUnk when absent
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Keeps the `max_size - 4` most frequent whitespace tokens, ties broken by
/// first occurrence. Throws std::invalid_argument on empty input.
Vocabulary build_vocab(const std::vector<std::string>& lines, std::size_t max_size);

/// Vocabulary with reserved ids followed by `prefix0 .. prefix{n-1}`.
Vocabulary synthetic_vocab(std::size_t size, std::string_view prefix = "w");

std::vector<std::string_view> split_whitespace(std::string_view line);

Sentence encode(std::string_view line, const Vocabulary& vocab);
std::string decode(const Sentence& s, const Vocabulary& vocab);

NgramCounts ngrams(const Sentence& s, int n);

struct CorpusEntry {
  Sentence source;
  Sentence reference;
  int doc_id = 0;
};

/// Aligned (source, reference) pairs; doc ids are non-decreasing in file order.
struct DocumentCorpus {
  std::vector<CorpusEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  /// Half-open [begin, end) entry ranges, one per contiguous doc id run.
  std::vector<std::pair<std::size_t, std::size_t>> document_spans() const;
};

/// S aligned pairs sharing one (pseudo-)document context.
struct DocumentBatch {
  std::vector<Sentence> sources;
  std::vector<Sentence> references;
  /// Doc id when all pairs come from one document, otherwise -1.
  int doc_id = -1;

  std::size_t size() const { return sources.size(); }
  bool empty() const { return sources.empty(); }
};

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// Reads parallel source/reference files plus a doc-id sidecar. Without a
/// doc-id file, `pseudo_doc_size` must be set and line i gets doc id i / S.
DocumentCorpus read_document_corpus(const std::filesystem::path& src_path,
                                    const std::filesystem::path& ref_path,
                                    const std::optional<std::filesystem::path>& docid_path,
                                    const Vocabulary& vocab,
                                    std::optional<std::size_t> pseudo_doc_size = std::nullopt);

/// Parses a doc-id sidecar (one integer per line).
std::vector<int> parse_doc_ids(const std::vector<std::string>& lines);

}  // namespace docmrt
