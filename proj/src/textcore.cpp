#include "docmrt/textcore.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace docmrt {

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) add(t);
}

TokenId Vocabulary::add(std::string_view token) {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), id);
  return id;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw std::out_of_range("token id " + std::to_string(id) + " out of vocabulary range");
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::string>& lines, std::size_t max_size) {
  if (max_size < kNumReserved + 1)
    throw std::invalid_argument("vocabulary max_size must be at least 5");
  struct Stat {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Stat> stats;
  std::vector<std::string> order;
  std::size_t position = 0;
  for (const auto& line : lines) {
    for (auto tok : split_whitespace(line)) {
      auto [it, inserted] = stats.try_emplace(std::string(tok), Stat{0, position});
      if (inserted) order.push_back(it->first);
      ++it->second.count;
      ++position;
    }
  }
  if (order.empty()) throw std::invalid_argument("empty corpus");

  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    const auto& sa = stats.at(a);
    const auto& sb = stats.at(b);
    if (sa.count != sb.count) return sa.count > sb.count;
    return sa.first < sb.first;
  });

  Vocabulary vocab;
  for (const auto& tok : order) {
    if (vocab.size() >= max_size) break;
    if (vocab.contains(tok)) continue;  // corpus token spelled like a reserved one
    vocab.add(tok);
  }
  return vocab;
}

Vocabulary synthetic_vocab(std::size_t size, std::string_view prefix) {
  Vocabulary vocab;
  for (std::size_t i = kNumReserved; i < size; ++i) vocab.add(std::string(prefix) + std::to_string(i));
  return vocab;
}

Sentence encode(std::string_view line, const Vocabulary& vocab) {
  Sentence out;
  for (auto tok : split_whitespace(line)) out.push_back(vocab.id(tok));
  return out;
}

std::string decode(const Sentence& s, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(s[i]);
  }
  return out;
}

NgramCounts ngrams(const Sentence& s, int n) {
  NgramCounts counts;
  if (n < 1 || s.size() < static_cast<std::size_t>(n)) return counts;
  const auto len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= s.size(); ++i)
    ++counts[std::vector<TokenId>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                  s.begin() + static_cast<std::ptrdiff_t>(i + len))];
  return counts;
}

std::vector<std::pair<std::size_t, std::size_t>> DocumentCorpus::document_spans() const {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= entries.size(); ++i) {
    if (i == entries.size() || entries[i].doc_id != entries[begin].doc_id) {
      spans.emplace_back(begin, i);
      begin = i;
    }
  }
  return spans;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<int> parse_doc_ids(const std::vector<std::string>& lines) {
  std::vector<int> ids;
  ids.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto toks = split_whitespace(lines[i]);
    int value = 0;
    bool ok = toks.size() == 1;
    if (ok) {
      auto [ptr, ec] = std::from_chars(toks[0].data(), toks[0].data() + toks[0].size(), value);
      ok = ec == std::errc() && ptr == toks[0].data() + toks[0].size();
    }
    if (!ok) throw std::invalid_argument("unparseable doc id on line " + std::to_string(i + 1) + ": '" + lines[i] + "'");
    if (!ids.empty() && value < ids.back())
      throw std::invalid_argument("doc ids must be non-decreasing (line " + std::to_string(i + 1) + ")");
    ids.push_back(value);
  }
  return ids;
}

DocumentCorpus read_document_corpus(const std::filesystem::path& src_path,
                                    const std::filesystem::path& ref_path,
                                    const std::optional<std::filesystem::path>& docid_path,
                                    const Vocabulary& vocab,
                                    std::optional<std::size_t> pseudo_doc_size) {
  const auto src = read_lines(src_path);
  const auto ref = read_lines(ref_path);
  if (src.size() != ref.size())
    throw std::invalid_argument("line-count mismatch: " + std::to_string(src.size()) + " source vs " +
                                std::to_string(ref.size()) + " reference lines");
  std::vector<int> doc_ids;
  if (docid_path) {
    doc_ids = parse_doc_ids(read_lines(*docid_path));
    if (doc_ids.size() != src.size())
      throw std::invalid_argument("line-count mismatch: doc-id file has " + std::to_string(doc_ids.size()) +
                                  " lines, expected " + std::to_string(src.size()));
  } else {
    if (!pseudo_doc_size || *pseudo_doc_size == 0)
      throw std::invalid_argument("no doc-id file given and pseudo-document size unset");
    for (std::size_t i = 0; i < src.size(); ++i) doc_ids.push_back(static_cast<int>(i / *pseudo_doc_size));
  }
  DocumentCorpus corpus;
  corpus.entries.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i)
    corpus.entries.push_back({encode(src[i], vocab), encode(ref[i], vocab), doc_ids[i]});
  return corpus;
}

}  // namespace docmrt
