#include <algorithm>
#include <cmath>
#include <numeric>

#include "docmrt/harness.hpp"
#include "json.hpp"

namespace docmrt {

namespace {

Sentence random_sentence(Rng& rng, int vocab, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<TokenId> tok(static_cast<TokenId>(kNumReserved), static_cast<TokenId>(vocab - 1));
  Sentence s(static_cast<std::size_t>(len(rng)));
  for (auto& t : s) t = tok(rng);
  return s;
}

ModelParams random_params(ModelDims dims, Rng& rng, double scale) {
  ModelParams p(dims);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : p.values()) v = u(rng);
  return p;
}

std::vector<std::size_t> pick_coords(std::size_t size, std::size_t count, Rng& rng) {
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), 0);
  if (count >= size) return all;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

GradCheckEntry run_fd(const std::string& name, const ModelParams& params,
                      const std::function<double(const ModelParams&)>& value, std::vector<double> analytic,
                      const std::vector<std::size_t>& coords, const GradCheckConfig& cfg, double threshold) {
  if (cfg.corrupt != 0.0) {
    auto worst = std::max_element(coords.begin(), coords.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(analytic[a]) < std::abs(analytic[b]);
    });
    analytic[*worst] += cfg.corrupt;
  }
  ModelParams probe = params;
  auto fn = [&](std::span<const double> theta) {
    std::copy(theta.begin(), theta.end(), probe.values().begin());
    return value(probe);
  };
  const auto res = fd_gradient_check(fn, params.values(), analytic, cfg.eps, coords);
  GradCheckEntry e;
  e.function = name;
  e.max_rel_error = res.max_rel_error;
  e.threshold = threshold;
  e.coords_checked = res.coords_checked;
  e.pass = res.coords_checked > 0 && res.max_rel_error < threshold;
  return e;
}

}  // namespace

bool GradCheckReport::passed() const {
  return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

std::string GradCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed();
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json row;
    row["function"] = e.function;
    row["max_rel_error"] = e.max_rel_error;
    row["threshold"] = e.threshold;
    row["coords_checked"] = e.coords_checked;
    row["pass"] = e.pass;
    arr.push_back(row);
  }
  j["checks"] = arr;
  return j.dump(2);
}

GradCheckReport grad_check(const GradCheckConfig& cfg) {
  if (cfg.max_len < 1 || cfg.coords < 1) throw ValidationError("grad-check needs max-len >= 1 and coords >= 1");
  GradCheckReport report;
  Rng rng = make_rng(cfg.seed, {0x6C4E});
  const ModelDims dims{cfg.vocab, cfg.embed, cfg.hidden};
  const auto params = random_params(dims, rng, 0.5);
  const auto coords = pick_coords(params.size(), cfg.coords, rng);

  const Sentence src = random_sentence(rng, cfg.vocab, 2, 5);
  const Sentence tgt = random_sentence(rng, cfg.vocab, 1, cfg.max_len);
  report.entries.push_back(run_fd(
      "log_prob", params, [&](const ModelParams& p) { return log_prob(p, src, tgt, cfg.max_len); },
      log_prob_grad(params, src, tgt, cfg.max_len), coords, cfg, cfg.log_prob_threshold));

  DocumentBatch batch;
  for (int i = 0; i < 4; ++i) {
    batch.sources.push_back(random_sentence(rng, cfg.vocab, 1, 5));
    batch.references.push_back(random_sentence(rng, cfg.vocab, 0, cfg.max_len));
  }
  report.entries.push_back(run_fd(
      "mle_loss", params, [&](const ModelParams& p) { return mle_loss_grad(p, batch, cfg.max_len).loss; },
      mle_loss_grad(params, batch, cfg.max_len).grad, coords, cfg, cfg.mle_threshold));

  // The exact risk enumerates a cross product of output spaces, so it runs
  // on a smaller instance.
  const ModelDims small{5, 3, 3};
  const int small_len = 2;
  const auto small_params = random_params(small, rng, 0.5);
  const auto small_coords = pick_coords(small_params.size(), cfg.coords, rng);
  DocumentBatch doc;
  for (int i = 0; i < 2; ++i) {
    doc.sources.push_back(random_sentence(rng, small.vocab, 1, 3));
    doc.references.push_back(random_sentence(rng, small.vocab, 1, small_len));
  }
  const auto cost = RiskCost::for_kind(CostKind::OneMinusDocBleu);
  report.entries.push_back(run_fd(
      "exact_risk", small_params, [&](const ModelParams& p) { return exact_risk(p, doc, cost, small_len); },
      exact_risk_grad(small_params, doc, cost, small_len), small_coords, cfg, cfg.risk_threshold));
  return report;
}

bool EnumCheckReport::passed() const {
  return max_normalization_error <= 1e-10 && max_null_gradient <= 1e-10 && unbiased_fraction >= 0.99 &&
         coords_tested > 0;
}

std::string EnumCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed();
  j["max_normalization_error"] = max_normalization_error;
  j["max_null_gradient"] = max_null_gradient;
  j["unbiased_fraction"] = unbiased_fraction;
  j["coords_tested"] = coords_tested;
  return j.dump(2);
}

EnumCheckReport enum_check(const EnumCheckConfig& cfg) {
  if (cfg.thetas < 1 || cfg.trials < 2 || cfg.sentences < 1 || cfg.samples < 1)
    throw ValidationError("enum-check needs thetas >= 1, trials >= 2, sentences >= 1, samples >= 1");
  EnumCheckReport report;
  Rng rng = make_rng(cfg.seed, {0xE2C4});
  const ModelDims dims{cfg.vocab, cfg.embed, cfg.hidden};

  for (std::size_t t = 0; t < cfg.thetas; ++t) {
    const auto params = random_params(dims, rng, 1.0);
    const Sentence src = random_sentence(rng, cfg.vocab, 1, 4);
    double total = 0;
    for (const auto& ws : enumerate_output_space(params, src, cfg.normalization_max_len)) total += ws.prob;
    report.max_normalization_error = std::max(report.max_normalization_error, std::abs(total - 1.0));

    DocumentBatch batch;
    for (std::size_t s = 0; s < cfg.sentences; ++s) {
      batch.sources.push_back(random_sentence(rng, cfg.vocab, 1, 3));
      batch.references.push_back(random_sentence(rng, cfg.vocab, 1, cfg.max_len));
    }
    const RiskCost constant{CostKind::OneMinusSentBleu, constant_document_cost(0.7)};
    for (double g : exact_risk_grad(params, batch, constant, cfg.max_len))
      report.max_null_gradient = std::max(report.max_null_gradient, std::abs(g));
  }

  // Monte Carlo: raw doc-MRT with the random scheme against the exact gradient.
  const auto params = random_params(dims, rng, 1.0);
  DocumentBatch batch;
  for (std::size_t s = 0; s < cfg.sentences; ++s) {
    batch.sources.push_back(random_sentence(rng, cfg.vocab, 1, 3));
    batch.references.push_back(random_sentence(rng, cfg.vocab, 1, cfg.max_len));
  }
  const auto cost = RiskCost::for_kind(CostKind::OneMinusDocBleu);
  const auto exact = exact_risk_grad(params, batch, cost, cfg.max_len);
  TrainConfig tc;
  tc.samples = cfg.samples;
  tc.max_len = cfg.max_len;
  tc.estimator = Estimator::Raw;
  std::vector<double> sum(params.size(), 0.0), sum_sq(params.size(), 0.0);
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    Rng trial_rng = make_rng(cfg.seed, {0x7A1, trial});
    const auto est = doc_mrt_grad(params, batch, tc, DocumentScheme::Random, trial_rng);
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += est.grad[i];
      sum_sq[i] += est.grad[i] * est.grad[i];
    }
  }
  const double T = static_cast<double>(cfg.trials);
  std::size_t within = 0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    if (std::abs(exact[i]) <= 1e-6) continue;
    ++report.coords_tested;
    const double mean = sum[i] / T;
    const double var = std::max(0.0, (sum_sq[i] - T * mean * mean) / (T - 1));
    const double se = std::sqrt(var / T);
    if (std::abs(mean - exact[i]) <= 3 * se) ++within;
  }
  report.unbiased_fraction =
      report.coords_tested ? static_cast<double>(within) / static_cast<double>(report.coords_tested) : 0.0;
  return report;
}

}  // namespace docmrt
