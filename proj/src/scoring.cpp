#include <array>
#include <map>

#include "docmrt/harness.hpp"
#include "json.hpp"

namespace docmrt {

namespace {

double metric_value(MetricKind metric, std::span<const Sentence> hyps, std::span<const Sentence> refs,
                    std::span<const Sentence> srcs) {
  switch (metric) {
    case MetricKind::Bleu: return corpus_bleu(hyps, refs).value;
    case MetricKind::Ter: return doc_ter(hyps, refs).value;
    case MetricKind::Gleu: return gleu(hyps, srcs, refs).value;
  }
  throw std::logic_error("unhandled metric");
}

}  // namespace

std::string ScoreReport::to_json() const {
  nlohmann::ordered_json j;
  j["metric"] = std::string(docmrt::to_string(metric));
  j["corpus"] = corpus;
  j["sentences"] = sentences;
  nlohmann::ordered_json docs = nlohmann::ordered_json::array();
  for (const auto& [id, score] : per_document) docs.push_back({{"doc_id", id}, {"score", score}});
  j["documents"] = docs;
  return j.dump(2);
}

ScoreReport score_documents(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
                            const std::vector<Sentence>& srcs, const std::vector<int>& doc_ids, MetricKind metric) {
  if (hyps.size() != refs.size() || doc_ids.size() != hyps.size())
    throw ValidationError("hypothesis, reference and doc-id line counts differ");
  if (metric == MetricKind::Gleu && srcs.size() != hyps.size())
    throw ValidationError("GLEU needs one source line per hypothesis");
  if (hyps.empty()) throw ValidationError("nothing to score");

  ScoreReport report;
  report.metric = metric;
  report.sentences = hyps.size();
  report.corpus = metric_value(metric, hyps, refs, srcs);

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < doc_ids.size(); ++i) groups[doc_ids[i]].push_back(i);
  for (const auto& [id, rows] : groups) {
    std::vector<Sentence> h, r, s;
    for (auto i : rows) {
      h.push_back(hyps[i]);
      r.push_back(refs[i]);
      if (!srcs.empty()) s.push_back(srcs[i]);
    }
    report.per_document.emplace_back(id, metric_value(metric, h, r, s));
  }
  return report;
}

ScoreReport score_corpus(const std::filesystem::path& hyp_path, const std::filesystem::path& ref_path,
                         const std::optional<std::filesystem::path>& src_path,
                         const std::optional<std::filesystem::path>& docid_path, MetricKind metric,
                         std::optional<std::size_t> pseudo_doc_size) {
  if (metric == MetricKind::Gleu && !src_path) throw ValidationError("GLEU scoring requires --src");
  const auto hyp_lines = read_lines(hyp_path);
  const auto ref_lines = read_lines(ref_path);
  std::vector<std::string> src_lines;
  if (src_path) src_lines = read_lines(*src_path);

  // Raw text is scored by token identity, so every token gets its own id.
  Vocabulary vocab;
  for (const auto* lines : std::array<const std::vector<std::string>*, 3>{&hyp_lines, &ref_lines, &src_lines})
    for (const auto& l : *lines)
      for (auto tok : split_whitespace(l)) vocab.add(std::string(tok));

  auto encode_all = [&](const std::vector<std::string>& lines) {
    std::vector<Sentence> out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back(encode(l, vocab));
    return out;
  };
  if (hyp_lines.size() != ref_lines.size()) throw ValidationError("line-count mismatch between hypothesis and reference");
  if (src_path && src_lines.size() != hyp_lines.size())
    throw ValidationError("line-count mismatch between hypothesis and source");

  std::vector<int> doc_ids(hyp_lines.size(), 0);
  if (docid_path) {
    try {
      doc_ids = parse_doc_ids(read_lines(*docid_path));
    } catch (const ValidationError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
    if (doc_ids.size() != hyp_lines.size()) throw ValidationError("line-count mismatch with doc-id file");
  } else if (pseudo_doc_size) {
    if (*pseudo_doc_size == 0) throw ValidationError("pseudo-document size must be >= 1");
    for (std::size_t i = 0; i < doc_ids.size(); ++i) doc_ids[i] = static_cast<int>(i / *pseudo_doc_size);
  }
  return score_documents(encode_all(hyp_lines), encode_all(ref_lines), encode_all(src_lines), doc_ids, metric);
}

}  // namespace docmrt
