#include "docmrt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace docmrt {

Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (auto s : stream) {
    words.push_back(static_cast<std::uint32_t>(s));
    words.push_back(static_cast<std::uint32_t>(s >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// ---- parameters ------------------------------------------------------------

ModelParams::ModelParams(ModelDims dims) : dims_(dims), values_(param_count(dims), 0.0) {}

ModelParams::ModelParams(ModelDims dims, std::vector<double> values) : dims_(dims), values_(std::move(values)) {
  if (values_.size() != param_count(dims_))
    throw std::invalid_argument("parameter vector length " + std::to_string(values_.size()) + " does not match layout " +
                                std::to_string(param_count(dims_)));
}

std::size_t ModelParams::param_count(const ModelDims& d) {
  if (d.vocab < static_cast<int>(kNumReserved) + 1 || d.embed < 1 || d.hidden < 1)
    throw std::invalid_argument("model dimensions need V >= 5, d >= 1, h >= 1");
  const auto V = static_cast<std::size_t>(d.vocab);
  const auto e = static_cast<std::size_t>(d.embed);
  const auto h = static_cast<std::size_t>(d.hidden);
  return 2 * V * e + 2 * e * h + h + h * V + V;
}

std::size_t ModelParams::tgt_embed_offset() const {
  return static_cast<std::size_t>(dims_.vocab) * static_cast<std::size_t>(dims_.embed);
}
std::size_t ModelParams::hidden_weight_offset() const { return 2 * tgt_embed_offset(); }
std::size_t ModelParams::hidden_bias_offset() const {
  return hidden_weight_offset() + 2 * static_cast<std::size_t>(dims_.embed) * static_cast<std::size_t>(dims_.hidden);
}
std::size_t ModelParams::output_weight_offset() const {
  return hidden_bias_offset() + static_cast<std::size_t>(dims_.hidden);
}
std::size_t ModelParams::output_bias_offset() const {
  return output_weight_offset() + static_cast<std::size_t>(dims_.hidden) * static_cast<std::size_t>(dims_.vocab);
}

ModelParams init_params(int vocab, int embed, int hidden, std::uint64_t seed, bool zero_init) {
  ModelParams params(ModelDims{vocab, embed, hidden});
  if (zero_init) return params;
  Rng rng = make_rng(seed, {0x1A17});
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (double& v : params.values()) v = dist(rng);
  return params;
}

// ---- forward / backward ------------------------------------------------------

namespace {

struct StepState {
  TokenId prev = kBos;
  std::vector<double> input;      // [context ; target embedding of prev]
  std::vector<double> hidden;     // tanh activations
  std::vector<double> logits;
  std::vector<double> log_probs;  // untempered log-softmax
};

class Decoder {
 public:
  Decoder(const ModelParams& params, const Sentence& src) : p_(params), d_(params.dims()) {
    const auto e = static_cast<std::size_t>(d_.embed);
    context_.assign(e, 0.0);
    const auto w = p_.values();
    for (TokenId tok : src) {
      check_token(tok);
      const double* row = &w[p_.src_embed_offset() + static_cast<std::size_t>(tok) * e];
      for (std::size_t k = 0; k < e; ++k) context_[k] += row[k];
    }
    if (!src.empty())
      for (double& c : context_) c /= static_cast<double>(src.size());
  }

  void step(TokenId prev, StepState& st) const {
    check_token(prev);
    const auto e = static_cast<std::size_t>(d_.embed);
    const auto h = static_cast<std::size_t>(d_.hidden);
    const auto V = static_cast<std::size_t>(d_.vocab);
    const auto w = p_.values();
    st.prev = prev;
    st.input.resize(2 * e);
    std::copy(context_.begin(), context_.end(), st.input.begin());
    const double* emb = &w[p_.tgt_embed_offset() + static_cast<std::size_t>(prev) * e];
    std::copy(emb, emb + e, st.input.begin() + static_cast<std::ptrdiff_t>(e));

    st.hidden.assign(w.begin() + static_cast<std::ptrdiff_t>(p_.hidden_bias_offset()),
                     w.begin() + static_cast<std::ptrdiff_t>(p_.hidden_bias_offset() + h));
    const double* W = &w[p_.hidden_weight_offset()];
    for (std::size_t i = 0; i < 2 * e; ++i) {
      const double x = st.input[i];
      const double* row = W + i * h;
      for (std::size_t j = 0; j < h; ++j) st.hidden[j] += x * row[j];
    }
    for (double& a : st.hidden) a = std::tanh(a);

    st.logits.assign(w.begin() + static_cast<std::ptrdiff_t>(p_.output_bias_offset()),
                     w.begin() + static_cast<std::ptrdiff_t>(p_.output_bias_offset() + V));
    const double* U = &w[p_.output_weight_offset()];
    for (std::size_t j = 0; j < h; ++j) {
      const double a = st.hidden[j];
      const double* row = U + j * V;
      for (std::size_t v = 0; v < V; ++v) st.logits[v] += a * row[v];
    }
    const double mx = *std::max_element(st.logits.begin(), st.logits.end());
    double z = 0;
    for (double l : st.logits) z += std::exp(l - mx);
    const double log_z = mx + std::log(z);
    st.log_probs.resize(V);
    for (std::size_t v = 0; v < V; ++v) st.log_probs[v] = st.logits[v] - log_z;
  }

  // Adds scale * d log p(target | step) / d theta, except for the source
  // embeddings whose gradient flows through d_context.
  void backward(const StepState& st, TokenId target, double scale, std::span<double> grad,
                std::vector<double>& d_context) const {
    const auto e = static_cast<std::size_t>(d_.embed);
    const auto h = static_cast<std::size_t>(d_.hidden);
    const auto V = static_cast<std::size_t>(d_.vocab);
    const auto w = p_.values();

    std::vector<double> d_logits(V);
    for (std::size_t v = 0; v < V; ++v) d_logits[v] = -scale * std::exp(st.log_probs[v]);
    d_logits[static_cast<std::size_t>(target)] += scale;

    double* dc = &grad[p_.output_bias_offset()];
    for (std::size_t v = 0; v < V; ++v) dc[v] += d_logits[v];

    const double* U = &w[p_.output_weight_offset()];
    double* dU = &grad[p_.output_weight_offset()];
    std::vector<double> d_pre(h);
    for (std::size_t j = 0; j < h; ++j) {
      const double a = st.hidden[j];
      const double* row = U + j * V;
      double* drow = dU + j * V;
      double acc = 0;
      for (std::size_t v = 0; v < V; ++v) {
        drow[v] += a * d_logits[v];
        acc += row[v] * d_logits[v];
      }
      d_pre[j] = acc * (1.0 - a * a);
    }

    double* db = &grad[p_.hidden_bias_offset()];
    for (std::size_t j = 0; j < h; ++j) db[j] += d_pre[j];

    const double* W = &w[p_.hidden_weight_offset()];
    double* dW = &grad[p_.hidden_weight_offset()];
    double* d_emb = &grad[p_.tgt_embed_offset() + static_cast<std::size_t>(st.prev) * e];
    for (std::size_t i = 0; i < 2 * e; ++i) {
      const double x = st.input[i];
      const double* row = W + i * h;
      double* drow = dW + i * h;
      double acc = 0;
      for (std::size_t j = 0; j < h; ++j) {
        drow[j] += x * d_pre[j];
        acc += row[j] * d_pre[j];
      }
      if (i < e)
        d_context[i] += acc;
      else
        d_emb[i - e] += acc;
    }
  }

  void backward_context(const Sentence& src, const std::vector<double>& d_context, std::span<double> grad) const {
    if (src.empty()) return;
    const auto e = static_cast<std::size_t>(d_.embed);
    const double inv = 1.0 / static_cast<double>(src.size());
    for (TokenId tok : src) {
      double* row = &grad[p_.src_embed_offset() + static_cast<std::size_t>(tok) * e];
      for (std::size_t k = 0; k < e; ++k) row[k] += d_context[k] * inv;
    }
  }

  int vocab() const { return d_.vocab; }

 private:
  void check_token(TokenId tok) const {
    if (tok < 0 || tok >= d_.vocab) throw std::out_of_range("token id " + std::to_string(tok) + " outside model vocabulary");
  }

  const ModelParams& p_;
  ModelDims d_;
  std::vector<double> context_;
};

void check_target(const Sentence& tgt, int max_len) {
  if (max_len < 0) throw std::invalid_argument("max_len must be non-negative");
  if (tgt.size() > static_cast<std::size_t>(max_len))
    throw std::invalid_argument("target length " + std::to_string(tgt.size()) + " exceeds max_len " +
                                std::to_string(max_len));
}

TokenId draw(const StepState& st, const SampleOptions& opt, Rng& rng) {
  const auto V = st.logits.size();
  if (opt.greedy) {
    return static_cast<TokenId>(std::max_element(st.log_probs.begin(), st.log_probs.end()) - st.log_probs.begin());
  }
  if (!(opt.temperature > 0)) throw std::invalid_argument("sampling temperature must be positive");
  std::vector<double> probs(V);
  if (opt.temperature == 1.0) {
    for (std::size_t v = 0; v < V; ++v) probs[v] = std::exp(st.log_probs[v]);
  } else {
    const double mx = *std::max_element(st.logits.begin(), st.logits.end());
    double z = 0;
    for (std::size_t v = 0; v < V; ++v) z += probs[v] = std::exp((st.logits[v] - mx) / opt.temperature);
    for (double& p : probs) p /= z;
  }
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(rng);
  for (std::size_t v = 0; v < V; ++v) {
    u -= probs[v];
    if (u < 0) return static_cast<TokenId>(v);
  }
  // Roundoff left u marginally positive: take the last token with mass.
  for (std::size_t v = V; v-- > 0;)
    if (probs[v] > 0) return static_cast<TokenId>(v);
  return static_cast<TokenId>(V - 1);
}

}  // namespace

double log_prob(const ModelParams& params, const Sentence& src, const Sentence& tgt, int max_len) {
  check_target(tgt, max_len);
  Decoder dec(params, src);
  StepState st;
  double total = 0;
  TokenId prev = kBos;
  for (TokenId y : tgt) {
    dec.step(prev, st);
    if (y < 0 || y >= dec.vocab()) throw std::out_of_range("target token outside model vocabulary");
    total += st.log_probs[static_cast<std::size_t>(y)];
    prev = y;
  }
  if (tgt.size() < static_cast<std::size_t>(max_len)) {
    dec.step(prev, st);
    total += st.log_probs[kEos];
  }
  return total;
}

double accumulate_log_prob_grad(const ModelParams& params, const Sentence& src, const Sentence& tgt, int max_len,
                                double scale, std::span<double> grad) {
  check_target(tgt, max_len);
  if (grad.size() != params.size()) throw std::invalid_argument("gradient buffer has the wrong length");
  Decoder dec(params, src);
  std::vector<double> d_context(static_cast<std::size_t>(params.dims().embed), 0.0);
  StepState st;
  double total = 0;
  TokenId prev = kBos;
  const std::size_t steps = tgt.size() + (tgt.size() < static_cast<std::size_t>(max_len) ? 1 : 0);
  for (std::size_t t = 0; t < steps; ++t) {
    const TokenId y = t < tgt.size() ? tgt[t] : kEos;
    if (y < 0 || y >= dec.vocab()) throw std::out_of_range("target token outside model vocabulary");
    dec.step(prev, st);
    total += st.log_probs[static_cast<std::size_t>(y)];
    dec.backward(st, y, scale, grad, d_context);
    prev = y;
  }
  dec.backward_context(src, d_context, grad);
  return total;
}

std::vector<double> log_prob_grad(const ModelParams& params, const Sentence& src, const Sentence& tgt, int max_len) {
  std::vector<double> grad(params.size(), 0.0);
  accumulate_log_prob_grad(params, src, tgt, max_len, 1.0, grad);
  return grad;
}

ScoredHypothesis sample(const ModelParams& params, const Sentence& src, const SampleOptions& options, Rng& rng,
                        int max_len) {
  Decoder dec(params, src);
  StepState st;
  ScoredHypothesis out;
  TokenId prev = kBos;
  while (out.sentence.size() < static_cast<std::size_t>(max_len)) {
    dec.step(prev, st);
    const TokenId y = draw(st, options, rng);
    out.log_prob += st.log_probs[static_cast<std::size_t>(y)];
    if (y == kEos) return out;
    out.sentence.push_back(y);
    prev = y;
  }
  return out;  // forced termination at max_len
}

ScoredHypothesis greedy_decode(const ModelParams& params, const Sentence& src, int max_len) {
  Rng unused(0);
  return sample(params, src, SampleOptions{1.0, true}, unused, max_len);
}

std::vector<ScoredHypothesis> beam_decode(const ModelParams& params, const Sentence& src, int beam, int max_len) {
  if (beam < 1) throw std::invalid_argument("beam size must be >= 1");
  Decoder dec(params, src);
  const auto width = static_cast<std::size_t>(beam);

  struct Candidate {
    ScoredHypothesis hyp;
    bool finished = false;
  };
  std::vector<ScoredHypothesis> live{ScoredHypothesis{}};
  std::vector<ScoredHypothesis> finished;
  StepState st;

  auto by_score = [](const ScoredHypothesis& a, const ScoredHypothesis& b) { return a.log_prob > b.log_prob; };

  while (!live.empty()) {
    std::vector<Candidate> cands;
    for (const auto& h : live) {
      if (h.sentence.size() == static_cast<std::size_t>(max_len)) {
        cands.push_back({h, true});  // forced EOS, no probability cost
        continue;
      }
      dec.step(h.sentence.empty() ? kBos : h.sentence.back(), st);
      for (int v = 0; v < dec.vocab(); ++v) {
        Candidate c{h, v == kEos};
        c.hyp.log_prob += st.log_probs[static_cast<std::size_t>(v)];
        if (v != kEos) c.hyp.sentence.push_back(v);
        cands.push_back(std::move(c));
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.hyp.log_prob > b.hyp.log_prob; });
    if (cands.size() > width) cands.resize(width);
    live.clear();
    for (auto& c : cands) (c.finished ? finished : live).push_back(std::move(c.hyp));

    std::stable_sort(finished.begin(), finished.end(), by_score);
    if (finished.size() > width) finished.resize(width);
    if (finished.size() == width && !live.empty()) {
      const double best_live = std::max_element(live.begin(), live.end(), [&](auto& a, auto& b) {
                                 return by_score(b, a);
                               })->log_prob;
      if (finished.back().log_prob >= best_live) break;  // scores only decrease
    }
  }
  return finished;
}

LossAndGrad mle_loss_grad(const ModelParams& params, const DocumentBatch& batch, int max_len) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  LossAndGrad out;
  out.grad.assign(params.size(), 0.0);
  double tokens = 0;
  for (const auto& ref : batch.references) tokens += static_cast<double>(ref.size() + 1);
  const double scale = -1.0 / tokens;
  double total = 0;
  for (std::size_t s = 0; s < batch.size(); ++s)
    total += accumulate_log_prob_grad(params, batch.sources[s], batch.references[s], max_len, scale, out.grad);
  out.loss = -total / tokens;
  return out;
}

std::vector<WeightedSentence> enumerate_output_space(const ModelParams& params, const Sentence& src, int max_len) {
  if (max_len < 0) throw std::invalid_argument("max_len must be non-negative");
  if (std::pow(static_cast<double>(params.dims().vocab), max_len) > 1e6)
    throw std::invalid_argument("output space too large to enumerate (V^max_len > 1e6)");
  Decoder dec(params, src);
  std::vector<WeightedSentence> out;
  Sentence prefix;
  StepState st;

  auto visit = [&](auto&& self, double lp) -> void {
    if (prefix.size() == static_cast<std::size_t>(max_len)) {
      out.push_back({prefix, std::exp(lp)});
      return;
    }
    dec.step(prefix.empty() ? kBos : prefix.back(), st);
    const std::vector<double> step_lp = st.log_probs;
    out.push_back({prefix, std::exp(lp + step_lp[kEos])});
    for (int v = 0; v < dec.vocab(); ++v) {
      if (v == kEos) continue;
      prefix.push_back(v);
      self(self, lp + step_lp[static_cast<std::size_t>(v)]);
      prefix.pop_back();
    }
  };
  visit(visit, 0.0);
  return out;
}

}  // namespace docmrt
