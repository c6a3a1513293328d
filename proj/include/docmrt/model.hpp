#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "docmrt/textcore.hpp"

namespace docmrt {

using Rng = std::mt19937_64;

/// Deterministic independent stream for (seed, stream ids...).
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {});

struct ModelDims {
  int vocab = 0;   // V
  int embed = 0;   // d
  int hidden = 0;  // h

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Flat parameter vector with a fixed layout:
///   source embeddings (V x d), target embeddings (V x d),
///   hidden weights (2d x h), hidden bias (h),
///   output projection (h x V), output bias (V).
/// All matrices are row-major.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelDims dims);  // zero-filled
  ModelParams(ModelDims dims, std::vector<double> values);

  static std::size_t param_count(const ModelDims& dims);

  const ModelDims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::size_t src_embed_offset() const { return 0; }
  std::size_t tgt_embed_offset() const;
  std::size_t hidden_weight_offset() const;
  std::size_t hidden_bias_offset() const;
  std::size_t output_weight_offset() const;
  std::size_t output_bias_offset() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  ModelDims dims_{};
  std::vector<double> values_;
};

/// Uniform [-0.1, 0.1] entries from a seeded generator, or all zeros.
ModelParams init_params(int vocab, int embed, int hidden, std::uint64_t seed, bool zero_init = false);

struct ScoredHypothesis {
  Sentence sentence;
  double log_prob = 0.0;  // natural log, includes the EOS step unless forced

  friend bool operator==(const ScoredHypothesis&, const ScoredHypothesis&) = default;
};

/// log P(tgt | src). Steps emit tgt tokens then EOS; a target of exactly
/// max_len tokens terminates without an EOS term.
double log_prob(const ModelParams& params, const Sentence& src, const Sentence& tgt, int max_len);

std::vector<double> log_prob_grad(const ModelParams& params, const Sentence& src, const Sentence& tgt, int max_len);

/// Adds scale * d log P(tgt|src) / d theta into `grad`; returns log P.
double accumulate_log_prob_grad(const ModelParams& params, const Sentence& src, const Sentence& tgt, int max_len,
                                double scale, std::span<double> grad);

struct SampleOptions {
  double temperature = 1.0;
  bool greedy = false;  // argmax at every step (the zero-temperature limit)
};

/// Left-to-right ancestral sample from the tempered distribution. The stored
/// log_prob is always under the untempered model.
ScoredHypothesis sample(const ModelParams& params, const Sentence& src, const SampleOptions& options, Rng& rng,
                        int max_len);

ScoredHypothesis greedy_decode(const ModelParams& params, const Sentence& src, int max_len);

/// Length-unnormalized beam search. Unique hypotheses sorted by log_prob desc.
std::vector<ScoredHypothesis> beam_decode(const ModelParams& params, const Sentence& src, int beam, int max_len);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Token-normalized negative log-likelihood of the references.
LossAndGrad mle_loss_grad(const ModelParams& params, const DocumentBatch& batch, int max_len);

struct WeightedSentence {
  Sentence sentence;
  double prob = 0.0;
};

/// Every sentence of length <= max_len with its exact probability, in
/// depth-first order. Throws when V^max_len exceeds 1e6.
std::vector<WeightedSentence> enumerate_output_space(const ModelParams& params, const Sentence& src, int max_len);

/// Checkpoint text format: "docmrt-ckpt v1 V d h" header, then one
/// shortest round-trip decimal per parameter per line.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const ModelParams& params);
ModelParams checkpoint_from_string(const std::string& text);

}  // namespace docmrt
