#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docmrt/batching.hpp"
#include "docmrt/metrics.hpp"
#include "docmrt/model.hpp"
#include "docmrt/sampling.hpp"

namespace docmrt {

enum class TrainMode { Mle, SeqMrt, DocMrtOrdered, DocMrtRandom };
enum class Estimator { Raw, Renormalized };
enum class DocumentScheme { Ordered, Random };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);
std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view name);

struct TrainConfig {
  std::size_t samples = 4;          // N, samples per sentence
  std::size_t batch_sentences = 4;  // S
  double temperature = 1.0;         // sampling only; risk always uses the untempered model
  double sharpness = 5e-3;          // α, renormalized estimator only
  TrainMode mode = TrainMode::DocMrtOrdered;
  Estimator estimator = Estimator::Raw;
  /// Document kinds drive doc-MRT directly; seq-MRT uses the sentence counterpart.
  CostKind cost_kind = CostKind::OneMinusDocBleu;
  double learning_rate = 0.1;
  std::size_t accumulation = 1;  // k micro-batches per update
  std::size_t max_updates = 100;
  std::uint64_t seed = 1;
  int max_len = 10;
  BatchingMode batching = BatchingMode::Document;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

struct RiskEstimate {
  double risk = 0.0;
  std::vector<double> grad;
  std::size_t n_documents = 0;  // documents (doc-MRT) or samples (seq-MRT) averaged over
};

/// Sequence MRT. Raw: (1/N) Σ_s Σ_n Δ ∇log P. Renormalized: each sample
/// weighted by Q(n|s) ∝ P^α over the sentence's N samples instead of 1/N.
RiskEstimate seq_mrt_grad(const ModelParams& params, const SampleSet& set, const TrainConfig& cfg);
RiskEstimate seq_mrt_grad(const ModelParams& params, const DocumentBatch& batch, const TrainConfig& cfg, Rng& rng);

/// Document MRT over N documents built by `scheme`. Raw:
/// (1/N) Σ_n D(Y_n) Σ_s ∇log P(y_n^(s)). Renormalized: document n weighted by
/// Q(n) ∝ P(Y_n)^α. `rng` is consumed only by the random scheme.
RiskEstimate doc_mrt_grad(const ModelParams& params, const SampleSet& set, const TrainConfig& cfg,
                          DocumentScheme scheme, const DocumentCost& cost, Rng& rng);
RiskEstimate doc_mrt_grad(const ModelParams& params, const DocumentBatch& batch, const TrainConfig& cfg,
                          DocumentScheme scheme, Rng& rng);

/// Accumulating forms: add the estimate's gradient into `grad`, return risk.
double accumulate_seq_mrt(const ModelParams& params, const SampleSet& set, const TrainConfig& cfg,
                          std::span<double> grad);
double accumulate_doc_mrt(const ModelParams& params, const SampleSet& set, const TrainConfig& cfg,
                          DocumentScheme scheme, const DocumentCost& cost, Rng& rng, std::span<double> grad);

/// R(θ) = Σ_Y D(Y,Y*) P(Y|X;θ) over the full cross product of per-sentence
/// output spaces, and its exact gradient.
struct ExactRisk {
  double risk = 0.0;
  std::vector<double> grad;
  std::size_t n_documents = 0;
};
ExactRisk exact_risk_and_grad(const ModelParams& params, const DocumentBatch& batch, const RiskCost& cost,
                              int max_len);
double exact_risk(const ModelParams& params, const DocumentBatch& batch, const RiskCost& cost, int max_len);
std::vector<double> exact_risk_grad(const ModelParams& params, const DocumentBatch& batch, const RiskCost& cost,
                                    int max_len);

struct FdCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;  // coordinates with |g| > 1e-8
  std::size_t worst_coord = 0;
};

/// Central differences on the sampled coordinates against `analytic`.
FdCheckResult fd_gradient_check(const std::function<double(std::span<const double>)>& fn,
                                std::span<const double> theta, std::span<const double> analytic, double eps,
                                std::span<const std::size_t> coords);

// ---- fine-tuning ------------------------------------------------------------

struct TrainLogEntry {
  std::size_t update = 0;
  TrainMode mode = TrainMode::Mle;
  double risk = 0.0;
  std::optional<double> heldout_metric;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

struct HeldoutMonitor {
  std::function<double(const ModelParams&)> evaluate;
  bool higher_is_better = true;
  std::size_t every = 0;     // evaluate every this many updates (0 = never)
  std::size_t patience = 0;  // stop after this many non-improving evaluations (0 = never)
  bool keep_best = false;    // return the best evaluated parameters
};

struct FinetuneResult {
  ModelParams params;
  std::vector<TrainLogEntry> log;
  std::size_t updates = 0;
  std::optional<double> best_heldout;
};

/// Stream for micro-batch `index` of a run seeded with `seed`.
Rng micro_batch_rng(std::uint64_t seed, std::size_t index);

/// Adds one micro-batch's gradient (objective chosen by cfg.mode) into
/// `grad`; returns its risk (MLE: token-normalized NLL).
double accumulate_micro_batch(const ModelParams& params, const DocumentBatch& batch, const TrainConfig& cfg,
                              Rng& rng, std::span<double> grad);

/// Plain SGD over batches from make_batches: k micro-batch gradients are
/// summed, then θ ← θ − lr·(sum)/k.
FinetuneResult finetune(ModelParams initial, const DocumentCorpus& corpus, const TrainConfig& cfg,
                        const HeldoutMonitor& monitor = {});

}  // namespace docmrt
