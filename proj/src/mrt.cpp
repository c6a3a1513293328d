#include "docmrt/mrt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace docmrt {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Mle: return "mle";
    case TrainMode::SeqMrt: return "seq_mrt";
    case TrainMode::DocMrtOrdered: return "doc_mrt_ordered";
    case TrainMode::DocMrtRandom: return "doc_mrt_random";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view name) {
  for (auto m : {TrainMode::Mle, TrainMode::SeqMrt, TrainMode::DocMrtOrdered, TrainMode::DocMrtRandom})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown training mode '" + std::string(name) + "'");
}

std::string_view to_string(Estimator e) { return e == Estimator::Raw ? "raw" : "renormalized"; }

Estimator parse_estimator(std::string_view name) {
  if (name == "raw") return Estimator::Raw;
  if (name == "renormalized") return Estimator::Renormalized;
  throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid config: " + what); };
  if (samples < 1) fail("samples (N) must be >= 1");
  if (batch_sentences < 1) fail("batch-sentences (S) must be >= 1");
  if (!(temperature > 0)) fail("temperature must be > 0");
  if (!(sharpness > 0)) fail("sharpness must be > 0");
  if (accumulation < 1) fail("accumulation (k) must be >= 1");
  if (!(learning_rate > 0)) fail("learning-rate must be > 0");
  if (max_len < 1) fail("max-len must be >= 1");
}

namespace {

void check_grad_buffer(const ModelParams& params, std::span<const double> grad) {
  if (grad.size() != params.size()) throw std::invalid_argument("gradient buffer has the wrong length");
}

// softmax(alpha * log_probs), max-shifted.
std::vector<double> sharpened_weights(std::span<const double> log_probs, double alpha) {
  std::vector<double> q(log_probs.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double lp : log_probs) mx = std::max(mx, alpha * lp);
  double z = 0;
  for (std::size_t i = 0; i < q.size(); ++i) z += q[i] = std::exp(alpha * log_probs[i] - mx);
  for (double& v : q) v /= z;
  return q;
}

// Σ_s Σ_n w[s][n] ∇log P(y_n^(s) | x^(s)), always in grid order.
void apply_sample_weights(const ModelParams& params, const SampleSet& set,
                          const std::vector<std::vector<double>>& weights, int max_len, std::span<double> grad) {
  for (std::size_t s = 0; s < set.num_sentences(); ++s)
    for (std::size_t n = 0; n < set.num_samples(); ++n) {
      const double w = weights[s][n];
      if (w == 0.0) continue;
      accumulate_log_prob_grad(params, set.batch.sources[s], set.grid[s][n].sentence, max_len, w, grad);
    }
}

}  // namespace

double accumulate_seq_mrt(const ModelParams& params, const SampleSet& set, const TrainConfig& cfg,
                          std::span<double> grad) {
  check_grad_buffer(params, grad);
  const std::size_t S = set.num_sentences();
  const std::size_t N = set.num_samples();
  std::vector<std::vector<double>> weights(S, std::vector<double>(N, 0.0));
  double risk = 0;
  for (std::size_t s = 0; s < S; ++s) {
    if (cfg.estimator == Estimator::Raw) {
      for (std::size_t n = 0; n < N; ++n) {
        weights[s][n] = set.costs[s][n] / static_cast<double>(N);
        risk += weights[s][n];
      }
    } else {
      std::vector<double> lps(N);
      for (std::size_t n = 0; n < N; ++n) lps[n] = set.grid[s][n].log_prob;
      const auto q = sharpened_weights(lps, cfg.sharpness);
      for (std::size_t n = 0; n < N; ++n) {
        weights[s][n] = q[n] * set.costs[s][n];
        risk += weights[s][n];
      }
    }
  }
  apply_sample_weights(params, set, weights, cfg.max_len, grad);
  return risk;
}

double accumulate_doc_mrt(const ModelParams& params, const SampleSet& set, const TrainConfig& cfg,
                          DocumentScheme scheme, const DocumentCost& cost, Rng& rng, std::span<double> grad) {
  check_grad_buffer(params, grad);
  const std::size_t S = set.num_sentences();
  const std::size_t N = set.num_samples();
  if (S == 0) return 0.0;
  auto docs = scheme == DocumentScheme::Ordered ? build_documents_ordered(set, cost)
                                                : build_documents_random(set, cost, rng);

  // Canonical order: by the sample index of sentence 0. Every scheme puts each
  // grid cell in exactly one document, so this is a permutation of `docs`.
  std::vector<const SampledDocument*> canon(N, nullptr);
  for (const auto& d : docs) canon.at(d.assignment[0]) = &d;

  std::vector<double> doc_weight(N);
  if (cfg.estimator == Estimator::Raw) {
    for (std::size_t n = 0; n < N; ++n) doc_weight[n] = canon[n]->cost / static_cast<double>(N);
  } else {
    std::vector<double> lps(N);
    for (std::size_t n = 0; n < N; ++n) lps[n] = canon[n]->log_prob;
    const auto q = sharpened_weights(lps, cfg.sharpness);
    for (std::size_t n = 0; n < N; ++n) doc_weight[n] = q[n] * canon[n]->cost;
  }

  double risk = 0;
  std::vector<std::vector<double>> weights(S, std::vector<double>(N, 0.0));
  for (std::size_t n = 0; n < N; ++n) {
    risk += doc_weight[n];
    for (std::size_t s = 0; s < S; ++s) weights[s][canon[n]->assignment[s]] = doc_weight[n];
  }
  apply_sample_weights(params, set, weights, cfg.max_len, grad);
  return risk;
}

RiskEstimate seq_mrt_grad(const ModelParams& params, const SampleSet& set, const TrainConfig& cfg) {
  RiskEstimate out;
  out.grad.assign(params.size(), 0.0);
  out.risk = accumulate_seq_mrt(params, set, cfg, out.grad);
  out.n_documents = set.num_samples() * set.num_sentences();
  return out;
}

RiskEstimate seq_mrt_grad(const ModelParams& params, const DocumentBatch& batch, const TrainConfig& cfg, Rng& rng) {
  const auto set = draw_sample_set(params, batch, cfg.samples, cfg.temperature, rng, cfg.max_len,
                                   sentence_counterpart(cfg.cost_kind));
  return seq_mrt_grad(params, set, cfg);
}

RiskEstimate doc_mrt_grad(const ModelParams& params, const SampleSet& set, const TrainConfig& cfg,
                          DocumentScheme scheme, const DocumentCost& cost, Rng& rng) {
  RiskEstimate out;
  out.grad.assign(params.size(), 0.0);
  out.risk = accumulate_doc_mrt(params, set, cfg, scheme, cost, rng, out.grad);
  out.n_documents = set.num_samples();
  return out;
}

RiskEstimate doc_mrt_grad(const ModelParams& params, const DocumentBatch& batch, const TrainConfig& cfg,
                          DocumentScheme scheme, Rng& rng) {
  const auto cost = RiskCost::for_kind(cfg.cost_kind);
  const auto set = draw_sample_set(params, batch, cfg.samples, cfg.temperature, rng, cfg.max_len, cost.sentence_kind);
  return doc_mrt_grad(params, set, cfg, scheme, cost.document, rng);
}

ExactRisk exact_risk_and_grad(const ModelParams& params, const DocumentBatch& batch, const RiskCost& cost,
                              int max_len) {
  const std::size_t S = batch.size();
  std::vector<std::vector<WeightedSentence>> spaces(S);
  std::vector<std::vector<double>> sentence_costs(S);
  double total = 1;
  for (std::size_t s = 0; s < S; ++s) {
    spaces[s] = enumerate_output_space(params, batch.sources[s], max_len);
    total *= static_cast<double>(spaces[s].size());
    if (total > 1e6) throw std::invalid_argument("too many documents for exact risk (> 1e6)");
    for (const auto& ws : spaces[s])
      sentence_costs[s].push_back(seq_cost(cost.sentence_kind, ws.sentence, batch.references[s], &batch.sources[s]));
  }

  // marginal[s][i] = Σ over documents whose sentence s is candidate i of D·P(Y).
  std::vector<std::vector<double>> marginal(S);
  for (std::size_t s = 0; s < S; ++s) marginal[s].assign(spaces[s].size(), 0.0);

  ExactRisk out;
  std::vector<std::size_t> idx(S, 0);
  std::vector<Sentence> hyps(S);
  std::vector<double> costs(S);
  while (true) {
    double p = 1;
    for (std::size_t s = 0; s < S; ++s) {
      hyps[s] = spaces[s][idx[s]].sentence;
      costs[s] = sentence_costs[s][idx[s]];
      p *= spaces[s][idx[s]].prob;
    }
    const double d = cost.document(DocumentView{hyps, batch.references, batch.sources, costs});
    out.risk += d * p;
    for (std::size_t s = 0; s < S; ++s) marginal[s][idx[s]] += d * p;
    ++out.n_documents;

    std::size_t s = S;
    bool done = true;
    while (s > 0) {
      --s;
      if (++idx[s] < spaces[s].size()) {
        done = false;
        break;
      }
      idx[s] = 0;
    }
    if (done) break;
  }

  out.grad.assign(params.size(), 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t i = 0; i < spaces[s].size(); ++i)
      if (marginal[s][i] != 0.0)
        accumulate_log_prob_grad(params, batch.sources[s], spaces[s][i].sentence, max_len, marginal[s][i], out.grad);
  return out;
}

double exact_risk(const ModelParams& params, const DocumentBatch& batch, const RiskCost& cost, int max_len) {
  return exact_risk_and_grad(params, batch, cost, max_len).risk;
}

std::vector<double> exact_risk_grad(const ModelParams& params, const DocumentBatch& batch, const RiskCost& cost,
                                    int max_len) {
  return exact_risk_and_grad(params, batch, cost, max_len).grad;
}

FdCheckResult fd_gradient_check(const std::function<double(std::span<const double>)>& fn,
                                std::span<const double> theta, std::span<const double> analytic, double eps,
                                std::span<const std::size_t> coords) {
  if (!(eps > 0)) throw std::invalid_argument("finite-difference step must be positive");
  if (analytic.size() != theta.size()) throw std::invalid_argument("analytic gradient length mismatch");
  FdCheckResult res;
  std::vector<double> x(theta.begin(), theta.end());
  for (std::size_t c : coords) {
    const double g = analytic[c];
    if (std::abs(g) <= 1e-8) continue;
    const double orig = x[c];
    x[c] = orig + eps;
    const double up = fn(x);
    x[c] = orig - eps;
    const double down = fn(x);
    x[c] = orig;
    const double fd = (up - down) / (2 * eps);
    const double rel = std::abs(fd - g) / std::max(std::abs(fd), std::abs(g));
    ++res.coords_checked;
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_coord = c;
    }
  }
  return res;
}

}  // namespace docmrt
