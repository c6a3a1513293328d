#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "docmrt/batching.hpp"
#include "docmrt/metrics.hpp"
#include "docmrt/model.hpp"
#include "docmrt/mrt.hpp"
#include "docmrt/textcore.hpp"

namespace docmrt {

/// Raised for malformed configuration or failed input validation; the CLI
/// maps it to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---- configuration ------------------------------------------------------------

/// Flat key=value configuration. '#' starts a comment; blank lines ignored.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

// ---- synthetic task ---------------------------------------------------------------

enum class TransductionRule { Copy = 0, Reverse = 1, Cipher = 2 };

struct TaskSpec {
  int vocab_size = 20;
  int min_len = 3;
  int max_len = 8;  // Lmax, must not exceed the model's max_len
  std::size_t sentences_per_doc = 4;
  std::size_t train_docs = 2000;
  std::size_t valid_docs = 100;
  std::size_t test_docs = 200;
  int rule = 2;
  /// Each document draws one of two cipher variants for all its sentences.
  bool style_consistency = true;
  /// Probability that a document uses the primary variant.
  double style_bias = 0.5;
  /// Per-token reference corruption, train split only.
  double noise = 0.0;
  std::uint64_t seed = 1;

  void validate(int model_max_len) const;
};

struct SyntheticCorpus {
  Vocabulary vocab;
  DocumentCorpus train;
  DocumentCorpus valid;
  DocumentCorpus test;
  /// Variant (0 or 1) drawn for each document, by doc id.
  std::map<int, int> doc_variant;
  /// Token maps of the two variants.
  std::vector<TokenId> primary_table;
  std::vector<TokenId> secondary_table;
};

/// Copies or reverses the source (per rule), then maps every token through
/// `table` (indexed by token id).
Sentence transduce(const Sentence& src, TransductionRule rule, const std::vector<TokenId>& table);

SyntheticCorpus generate_synthetic_corpus(const TaskSpec& task);

// ---- evaluation -------------------------------------------------------------------

struct HeldoutScores {
  double bleu = 0.0;  // corpus-pooled document BLEU, unsmoothed
  double ter = 0.0;   // pooled document TER
  double gleu = 0.0;  // pooled document GLEU
};

std::vector<Sentence> decode_corpus(const ModelParams& params, const DocumentCorpus& corpus, int beam, int max_len);
HeldoutScores score_hypotheses(const DocumentCorpus& corpus, const std::vector<Sentence>& hyps);
/// The heldout metric matching a cost kind (BLEU, TER or GLEU family).
double metric_for_cost(CostKind kind, const HeldoutScores& scores);
bool metric_higher_is_better(CostKind kind);

// ---- experiments --------------------------------------------------------------------

struct ExperimentConfig {
  TaskSpec task;
  /// When set, fine-tuning and evaluation use this style bias instead of
  /// the baseline's (a shifted task variant).
  std::optional<double> finetune_style_bias;
  int embed_dim = 16;
  int hidden_dim = 32;
  int max_len = 10;
  std::size_t beam = 4;

  double mle_learning_rate = 0.5;
  std::size_t mle_max_updates = 20000;
  std::size_t mle_eval_every = 500;
  std::size_t mle_patience = 3;
  std::size_t mle_batch_sentences = 16;

  TrainConfig finetune;  // mode/batching overridden per row
  std::vector<TrainMode> modes{TrainMode::Mle, TrainMode::SeqMrt, TrainMode::DocMrtOrdered,
                               TrainMode::DocMrtRandom};
  std::vector<BatchingMode> batchings{BatchingMode::Document};
  std::size_t finetune_eval_every = 0;
  bool finetune_keep_best = false;

  std::uint64_t seed = 1;
  bool timing = false;  // wall-clock in the report breaks byte-for-byte reproducibility

  void validate() const;
};

/// Recognized keys with their defaults, as written by `config_to_map`.
ExperimentConfig experiment_config_from_map(const ConfigMap& map);
ConfigMap experiment_config_to_map(const ExperimentConfig& cfg);

struct ExperimentRow {
  TrainMode mode = TrainMode::Mle;
  BatchingMode batching = BatchingMode::Document;
  HeldoutScores scores;
  std::size_t updates = 0;
  double final_risk = 0.0;
};

struct ExperimentReport {
  HeldoutScores baseline;
  std::size_t baseline_updates = 0;
  std::vector<ExperimentRow> rows;
  ConfigMap config;
  std::uint64_t seed = 0;
  std::optional<double> wall_clock_seconds;

  std::string to_json() const;
};

struct ExperimentArtifacts {
  ModelParams baseline;
  std::vector<ModelParams> finetuned;               // one per row
  std::vector<std::vector<Sentence>> decoded;       // baseline first, then rows
  SyntheticCorpus corpus;
};

/// Trains an MLE baseline to validation convergence, fine-tunes it once per
/// (mode, batching) row and scores beam-decoded test output.
ExperimentReport run_experiment(const ExperimentConfig& cfg, ExperimentArtifacts* artifacts = nullptr);

/// Writes decoded outputs and reference/source/doc-id files for re-scoring.
void write_experiment_outputs(const ExperimentReport& report, const ExperimentArtifacts& artifacts,
                              const std::filesystem::path& dir);

/// MLE training from a fresh initialization with early stopping on
/// validation doc-BLEU; returns the best checkpoint.
FinetuneResult train_mle_baseline(const ExperimentConfig& cfg, const DocumentCorpus& train,
                                  const DocumentCorpus& valid);

// ---- corpus scoring -------------------------------------------------------------------

struct ScoreReport {
  MetricKind metric = MetricKind::Bleu;
  double corpus = 0.0;
  std::vector<std::pair<int, double>> per_document;  // (doc id, score)
  std::size_t sentences = 0;

  std::string to_json() const;
};

ScoreReport score_documents(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
                            const std::vector<Sentence>& srcs, const std::vector<int>& doc_ids, MetricKind metric);

/// Without a doc-id file, line i belongs to document i / pseudo_doc_size, or
/// the whole file is one document when that is unset.
ScoreReport score_corpus(const std::filesystem::path& hyp_path, const std::filesystem::path& ref_path,
                         const std::optional<std::filesystem::path>& src_path,
                         const std::optional<std::filesystem::path>& docid_path, MetricKind metric,
                         std::optional<std::size_t> pseudo_doc_size = std::nullopt);

// ---- verification commands -----------------------------------------------------------------

struct GradCheckConfig {
  int vocab = 6;
  int embed = 4;
  int hidden = 4;
  int max_len = 4;
  std::size_t coords = 50;
  double eps = 1e-4;
  std::uint64_t seed = 7;
  double log_prob_threshold = 1e-5;
  double mle_threshold = 1e-5;
  double risk_threshold = 1e-4;
  /// Test hook: added to one checked coordinate of every analytic gradient.
  double corrupt = 0.0;
};

struct GradCheckEntry {
  std::string function;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  std::size_t coords_checked = 0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
  std::string to_json() const;
};

GradCheckReport grad_check(const GradCheckConfig& cfg);

struct EnumCheckConfig {
  int vocab = 5;
  int embed = 3;
  int hidden = 3;
  int max_len = 2;
  int normalization_max_len = 3;
  std::size_t sentences = 2;
  std::size_t samples = 4;
  std::size_t trials = 10000;
  std::size_t thetas = 20;
  std::uint64_t seed = 11;
};

struct EnumCheckReport {
  double max_normalization_error = 0.0;
  double max_null_gradient = 0.0;
  double unbiased_fraction = 0.0;  // coordinates within 3 standard errors
  std::size_t coords_tested = 0;
  bool passed() const;
  std::string to_json() const;
};

EnumCheckReport enum_check(const EnumCheckConfig& cfg);

}  // namespace docmrt
