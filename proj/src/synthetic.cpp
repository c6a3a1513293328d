#include <algorithm>
#include <numeric>

#include "docmrt/harness.hpp"

namespace docmrt {

void TaskSpec::validate(int model_max_len) const {
  auto fail = [](const std::string& what) { throw ValidationError("invalid task: " + what); };
  if (vocab_size < static_cast<int>(kNumReserved) + 1) fail("vocab-size must be >= 5");
  if (min_len < 1 || min_len > max_len) fail("need 1 <= min-len <= max-sent-len");
  if (max_len > model_max_len) fail("max-sent-len exceeds the model max-len");
  if (sentences_per_doc < 1) fail("doc-sentences must be >= 1");
  if (train_docs < 1 || valid_docs < 1 || test_docs < 1) fail("every split needs at least one document");
  if (rule < 0 || rule > 2) fail("invalid rule id " + std::to_string(rule));
  if (style_bias < 0 || style_bias > 1) fail("style-bias must lie in [0, 1]");
  if (noise < 0 || noise > 1) fail("noise must lie in [0, 1]");
}

Sentence transduce(const Sentence& src, TransductionRule rule, const std::vector<TokenId>& table) {
  Sentence out = src;
  if (rule == TransductionRule::Reverse) std::reverse(out.begin(), out.end());
  for (auto& t : out) t = table.at(static_cast<std::size_t>(t));
  return out;
}

SyntheticCorpus generate_synthetic_corpus(const TaskSpec& task) {
  if (task.rule < 0 || task.rule > 2) throw ValidationError("invalid rule id " + std::to_string(task.rule));
  const auto V = static_cast<std::size_t>(task.vocab_size);
  const auto rule = static_cast<TransductionRule>(task.rule);
  const TokenId first = static_cast<TokenId>(kNumReserved);
  const std::size_t content = V - kNumReserved;

  SyntheticCorpus out;
  out.vocab = synthetic_vocab(V);

  // Token maps depend only on the seed, so task variants that differ in
  // style bias or noise share them.
  Rng table_rng = make_rng(task.seed, {0xC1F3});
  std::vector<TokenId> content_ids(content);
  std::iota(content_ids.begin(), content_ids.end(), first);
  std::vector<TokenId> base(V);
  std::iota(base.begin(), base.end(), 0);
  if (rule == TransductionRule::Cipher) {
    std::vector<TokenId> image = content_ids;
    for (std::size_t i = image.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(image[i - 1], image[pick(table_rng)]);
    }
    for (std::size_t i = 0; i < content; ++i) base[static_cast<std::size_t>(content_ids[i])] = image[i];
  }
  // Secondary variant: swap disjoint pairs among half of the output tokens.
  std::vector<TokenId> swap(V);
  std::iota(swap.begin(), swap.end(), 0);
  {
    std::vector<TokenId> pool = content_ids;
    for (std::size_t i = pool.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(pool[i - 1], pool[pick(table_rng)]);
    }
    const std::size_t swapped = (content / 2) & ~std::size_t{1};
    for (std::size_t i = 0; i + 1 < swapped; i += 2) {
      swap[static_cast<std::size_t>(pool[i])] = pool[i + 1];
      swap[static_cast<std::size_t>(pool[i + 1])] = pool[i];
    }
  }
  out.primary_table = base;
  out.secondary_table.resize(V);
  for (std::size_t t = 0; t < V; ++t) out.secondary_table[t] = swap[static_cast<std::size_t>(base[t])];

  Rng doc_rng = make_rng(task.seed, {0xD0C5});
  std::uniform_int_distribution<int> length(task.min_len, task.max_len);
  std::uniform_int_distribution<TokenId> token(first, static_cast<TokenId>(V - 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int doc_id = 0;
  auto fill = [&](DocumentCorpus& split, std::size_t docs, bool noisy) {
    for (std::size_t d = 0; d < docs; ++d, ++doc_id) {
      const double u = unit(doc_rng);
      const int variant = task.style_consistency && u >= task.style_bias ? 1 : 0;
      out.doc_variant[doc_id] = variant;
      const auto& table = variant == 0 ? out.primary_table : out.secondary_table;
      for (std::size_t s = 0; s < task.sentences_per_doc; ++s) {
        Sentence src(static_cast<std::size_t>(length(doc_rng)));
        for (auto& t : src) t = token(doc_rng);
        Sentence ref = transduce(src, rule, table);
        for (auto& t : ref) {
          const double r = unit(doc_rng);
          const TokenId replacement = token(doc_rng);
          if (noisy && r < task.noise) t = replacement;
        }
        split.entries.push_back({std::move(src), std::move(ref), doc_id});
      }
    }
  };
  fill(out.train, task.train_docs, task.noise > 0);
  fill(out.valid, task.valid_docs, false);
  fill(out.test, task.test_docs, false);
  return out;
}

}  // namespace docmrt
