#include <cmath>
#include <stdexcept>

#include "docmrt/mrt.hpp"
#include "json.hpp"

namespace docmrt {

std::string TrainLogEntry::to_json() const {
  nlohmann::ordered_json j;
  j["update"] = update;
  j["mode"] = std::string(docmrt::to_string(mode));
  j["risk"] = risk;
  if (heldout_metric) j["heldout_metric"] = *heldout_metric;
  j["seed"] = seed;
  return j.dump();
}

Rng micro_batch_rng(std::uint64_t seed, std::size_t index) { return make_rng(seed, {0x5A3D, index}); }

double accumulate_micro_batch(const ModelParams& params, const DocumentBatch& batch, const TrainConfig& cfg,
                              Rng& rng, std::span<double> grad) {
  switch (cfg.mode) {
    case TrainMode::Mle: {
      const auto lg = mle_loss_grad(params, batch, cfg.max_len);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += lg.grad[i];
      return lg.loss;
    }
    case TrainMode::SeqMrt: {
      const auto set = draw_sample_set(params, batch, cfg.samples, cfg.temperature, rng, cfg.max_len,
                                       sentence_counterpart(cfg.cost_kind));
      return accumulate_seq_mrt(params, set, cfg, grad);
    }
    case TrainMode::DocMrtOrdered:
    case TrainMode::DocMrtRandom: {
      const auto cost = RiskCost::for_kind(cfg.cost_kind);
      const auto set =
          draw_sample_set(params, batch, cfg.samples, cfg.temperature, rng, cfg.max_len, cost.sentence_kind);
      const auto scheme = cfg.mode == TrainMode::DocMrtOrdered ? DocumentScheme::Ordered : DocumentScheme::Random;
      return accumulate_doc_mrt(params, set, cfg, scheme, cost.document, rng, grad);
    }
  }
  throw std::logic_error("unhandled training mode");
}

FinetuneResult finetune(ModelParams initial, const DocumentCorpus& corpus, const TrainConfig& cfg,
                        const HeldoutMonitor& monitor) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("invalid config: empty training corpus");

  FinetuneResult result;
  result.params = std::move(initial);
  auto theta = result.params.values();

  std::size_t epoch = 0;
  auto epoch_seed = [&](std::size_t e) { return cfg.seed ^ (0x9E3779B97F4A7C15ULL * (e + 1)); };
  auto batches = make_batches(corpus, cfg.batching, cfg.batch_sentences, epoch_seed(epoch));
  std::size_t next_batch = 0;
  std::size_t micro = 0;

  const bool monitoring = monitor.evaluate && monitor.every > 0;
  std::optional<ModelParams> best_params;
  std::size_t stale = 0;
  auto better = [&](double a, double b) { return monitor.higher_is_better ? a > b : a < b; };
  if (monitoring) {
    result.best_heldout = monitor.evaluate(result.params);
    if (monitor.keep_best) best_params = result.params;
  }

  std::vector<double> acc(result.params.size());
  const double step = cfg.learning_rate / static_cast<double>(cfg.accumulation);
  for (std::size_t update = 1; update <= cfg.max_updates; ++update) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double risk = 0;
    for (std::size_t i = 0; i < cfg.accumulation; ++i) {
      if (next_batch == batches.size()) {
        batches = make_batches(corpus, cfg.batching, cfg.batch_sentences, epoch_seed(++epoch));
        next_batch = 0;
      }
      Rng rng = micro_batch_rng(cfg.seed, micro++);
      risk += accumulate_micro_batch(result.params, batches[next_batch++], cfg, rng, acc);
    }
    for (std::size_t j = 0; j < acc.size(); ++j) theta[j] -= step * acc[j];
    result.updates = update;

    TrainLogEntry entry{update, cfg.mode, risk / static_cast<double>(cfg.accumulation), std::nullopt, cfg.seed};
    bool stop = false;
    if (monitoring && update % monitor.every == 0) {
      const double m = monitor.evaluate(result.params);
      entry.heldout_metric = m;
      if (better(m, *result.best_heldout)) {
        result.best_heldout = m;
        stale = 0;
        if (monitor.keep_best) best_params = result.params;
      } else if (monitor.patience > 0 && ++stale >= monitor.patience) {
        stop = true;
      }
    }
    result.log.push_back(entry);
    if (stop) break;
  }
  if (best_params) result.params = std::move(*best_params);
  return result;
}

}  // namespace docmrt
