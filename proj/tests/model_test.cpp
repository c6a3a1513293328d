#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "docmrt/model.hpp"
#include "docmrt/mrt.hpp"
#include "oracles.hpp"

using namespace docmrt;

namespace {

ModelParams random_params(ModelDims dims, std::uint64_t seed, double scale = 1.0) {
  Rng rng = make_rng(seed, {99});
  std::uniform_real_distribution<double> u(-scale, scale);
  ModelParams p(dims);
  for (double& v : p.values()) v = u(rng);
  return p;
}

std::vector<std::size_t> all_coords(std::size_t n) {
  std::vector<std::size_t> c(n);
  std::iota(c.begin(), c.end(), 0);
  return c;
}

}  // namespace

TEST(Params, LayoutSizes) {
  const ModelDims dims{6, 3, 5};
  ModelParams p(dims);
  EXPECT_EQ(ModelParams::param_count(dims), 6u * 3 + 6 * 3 + 6 * 5 + 5 + 5 * 6 + 6);
  EXPECT_EQ(p.tgt_embed_offset(), 18u);
  EXPECT_EQ(p.hidden_weight_offset(), 36u);
  EXPECT_EQ(p.hidden_bias_offset(), 66u);
  EXPECT_EQ(p.output_weight_offset(), 71u);
  EXPECT_EQ(p.output_bias_offset(), 101u);
  EXPECT_EQ(p.size(), 107u);
  EXPECT_THROW(ModelParams::param_count({4, 1, 1}), std::invalid_argument);
}

TEST(Params, InitDeterminism) {
  EXPECT_EQ(init_params(8, 3, 3, 5), init_params(8, 3, 3, 5));
  EXPECT_NE(init_params(8, 3, 3, 5), init_params(8, 3, 3, 6));
  const auto z = init_params(8, 3, 3, 5, true);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
  const auto r = init_params(8, 3, 3, 5);
  for (double v : r.values()) {
    EXPECT_GE(v, -0.1);
    EXPECT_LE(v, 0.1);
  }
}

TEST(LogProb, ZeroParametersAreUniform) {
  const auto p = init_params(5, 2, 2, 1, true);
  EXPECT_NEAR(log_prob(p, {4}, {4, 4}, 5), 3 * std::log(1.0 / 5), 1e-12);
  EXPECT_NEAR(log_prob(p, {4}, {}, 5), std::log(1.0 / 5), 1e-12);
  // At the length cap the forced EOS contributes nothing.
  EXPECT_NEAR(log_prob(p, {4}, {4, 4}, 2), 2 * std::log(1.0 / 5), 1e-12);
  EXPECT_THROW(log_prob(p, {4}, {4, 4, 4}, 2), std::invalid_argument);
}

TEST(LogProb, MatchesIndependentForwardPass) {
  const auto p = random_params({5, 2, 2}, 3);
  Rng rng = make_rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto src = oracle::random_sentence(rng, 5, 0, 4);
    const auto tgt = oracle::random_sentence(rng, 5, 0, 4);
    ASSERT_NEAR(log_prob(p, src, tgt, 4), oracle::log_prob(p, src, tgt, 4), 1e-12);
  }
}

TEST(LogProb, GradientMatchesFiniteDifferences) {
  const auto p = random_params({6, 4, 4}, 7, 0.5);
  const Sentence src{4, 5, 5}, tgt{5, 4, 5};
  const auto g = log_prob_grad(p, src, tgt, 4);
  ModelParams probe = p;
  auto fn = [&](std::span<const double> th) {
    std::copy(th.begin(), th.end(), probe.values().begin());
    return log_prob(probe, src, tgt, 4);
  };
  const auto coords = all_coords(p.size());
  const auto res = fd_gradient_check(fn, p.values(), g, 1e-4, coords);
  EXPECT_GT(res.coords_checked, 20u);
  EXPECT_LT(res.max_rel_error, 1e-5);
}

TEST(LogProb, OutputBiasGradientAtZero) {
  const int V = 6;
  const auto p = init_params(V, 2, 2, 1, true);
  const Sentence tgt{4, 5};
  const auto g = log_prob_grad(p, {4}, tgt, 5);
  // Steps emit 4, 5 and EOS; each contributes one-hot(y) - 1/V.
  for (int v = 0; v < V; ++v) {
    double want = -3.0 / V;
    if (v == 4 || v == 5 || v == kEos) want += 1.0;
    EXPECT_NEAR(g[p.output_bias_offset() + static_cast<std::size_t>(v)], want, 1e-12);
  }
}

TEST(LogProb, UnusedEmbeddingsHaveZeroGradient) {
  const auto p = random_params({8, 3, 3}, 11);
  const auto g = log_prob_grad(p, {4, 5}, {6}, 4);
  const int d = 3;
  for (int tok : {7, kPad, kUnk})
    for (int k = 0; k < d; ++k) {
      EXPECT_EQ(g[static_cast<std::size_t>(tok * d + k)], 0.0);
      EXPECT_EQ(g[p.tgt_embed_offset() + static_cast<std::size_t>(tok * d + k)], 0.0);
    }
}

TEST(LogProb, AccumulateScalesAndAdds) {
  const auto p = random_params({6, 2, 3}, 12);
  const auto g = log_prob_grad(p, {4}, {5, 4}, 4);
  std::vector<double> acc(p.size(), 1.0);
  const double lp = accumulate_log_prob_grad(p, {4}, {5, 4}, 4, -2.0, acc);
  EXPECT_DOUBLE_EQ(lp, log_prob(p, {4}, {5, 4}, 4));
  for (std::size_t i = 0; i < acc.size(); ++i) EXPECT_NEAR(acc[i], 1.0 - 2.0 * g[i], 1e-12);
}

TEST(Sample, FixedSeedIsReproducible) {
  const auto p = random_params({7, 3, 3}, 13);
  Rng r1 = make_rng(5), r2 = make_rng(5);
  for (int i = 0; i < 20; ++i) ASSERT_EQ(sample(p, {4, 5}, {}, r1, 6), sample(p, {4, 5}, {}, r2, 6));
}

TEST(Sample, LogProbIsUntempered) {
  const auto p = random_params({7, 3, 3}, 14);
  Rng rng = make_rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto h = sample(p, {4, 6}, {0.5, false}, rng, 5);
    ASSERT_DOUBLE_EQ(h.log_prob, log_prob(p, {4, 6}, h.sentence, 5));
  }
}

TEST(Sample, GreedyFlagMatchesGreedyDecode) {
  const auto p = random_params({7, 3, 3}, 15);
  Rng rng = make_rng(7);
  EXPECT_EQ(sample(p, {4, 5}, {1.0, true}, rng, 6), greedy_decode(p, {4, 5}, 6));
}

TEST(Sample, UniformAtZeroParameters) {
  // First emitted token over V ids; chi-square with V-1 = 4 dof, 0.999 quantile 18.47.
  const int V = 5;
  const auto p = init_params(V, 2, 2, 1, true);
  Rng rng = make_rng(8);
  std::vector<double> counts(V, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto h = sample(p, {4}, {}, rng, 1);
    counts[h.sentence.empty() ? kEos : static_cast<std::size_t>(h.sentence[0])] += 1;
  }
  double chi2 = 0;
  const double expected = static_cast<double>(draws) / V;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 18.47);
}

TEST(Sample, RespectsMaxLen) {
  const auto p = random_params({6, 2, 2}, 16);
  Rng rng = make_rng(9);
  for (int i = 0; i < 200; ++i) ASSERT_LE(sample(p, {4}, {2.0, false}, rng, 3).sentence.size(), 3u);
}

TEST(Beam, WidthOneIsGreedy) {
  const auto p = random_params({7, 3, 3}, 17);
  Rng rng = make_rng(10);
  for (int i = 0; i < 20; ++i) {
    const auto src = oracle::random_sentence(rng, 7, 1, 4);
    const auto beam = beam_decode(p, src, 1, 5);
    ASSERT_FALSE(beam.empty());
    ASSERT_EQ(beam.front().sentence, greedy_decode(p, src, 5).sentence);
  }
}

TEST(Beam, SortedAndUnique) {
  const auto p = random_params({7, 3, 3}, 18);
  const auto beam = beam_decode(p, {4, 5, 6}, 4, 5);
  for (std::size_t i = 1; i < beam.size(); ++i) EXPECT_GE(beam[i - 1].log_prob, beam[i].log_prob);
  for (std::size_t i = 0; i < beam.size(); ++i)
    for (std::size_t j = i + 1; j < beam.size(); ++j) EXPECT_NE(beam[i].sentence, beam[j].sentence);
  for (const auto& h : beam) EXPECT_NEAR(h.log_prob, log_prob(p, {4, 5, 6}, h.sentence, 5), 1e-12);
}

TEST(Beam, FindsExactArgmaxOnEnumerableInstance) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_params({5, 3, 3}, 100 + seed, 2.0);
    const Sentence src{4, 4};
    const auto space = enumerate_output_space(p, src, 3);
    const auto best = std::max_element(space.begin(), space.end(),
                                       [](const auto& x, const auto& y) { return x.prob < y.prob; });
    const auto beam = beam_decode(p, src, 4, 3);
    ASSERT_EQ(beam.front().sentence, best->sentence) << "seed " << seed;
  }
}

TEST(MleLoss, SinglePair) {
  const auto p = random_params({6, 2, 2}, 19);
  DocumentBatch b{{{4, 5}}, {{5, 5, 4}}, 0};
  EXPECT_NEAR(mle_loss_grad(p, b, 5).loss, -log_prob(p, {4, 5}, {5, 5, 4}, 5) / 4, 1e-12);
}

TEST(MleLoss, ZeroParametersGiveLogV) {
  const auto p = init_params(9, 2, 2, 1, true);
  DocumentBatch b{{{4}, {5, 6}}, {{4, 5}, {}}, -1};
  EXPECT_NEAR(mle_loss_grad(p, b, 5).loss, std::log(9.0), 1e-12);
}

TEST(MleLoss, GradientMatchesFiniteDifferences) {
  const auto p = random_params({6, 4, 4}, 20, 0.5);
  DocumentBatch b{{{4, 5}, {5}, {4, 4, 5}}, {{5}, {4, 5, 5}, {}}, -1};
  const auto g = mle_loss_grad(p, b, 4).grad;
  ModelParams probe = p;
  auto fn = [&](std::span<const double> th) {
    std::copy(th.begin(), th.end(), probe.values().begin());
    return mle_loss_grad(probe, b, 4).loss;
  };
  const auto res = fd_gradient_check(fn, p.values(), g, 1e-4, all_coords(p.size()));
  EXPECT_LT(res.max_rel_error, 1e-5);
}

TEST(MleLoss, EmptyBatchThrows) {
  const auto p = init_params(6, 2, 2, 1);
  EXPECT_THROW(mle_loss_grad(p, DocumentBatch{}, 4), std::invalid_argument);
}

TEST(Enumerate, ZeroParameterProbabilityTree) {
  const auto p = init_params(5, 2, 2, 1, true);
  const auto space = enumerate_output_space(p, {4}, 2);
  // 1 empty + 4 of length 1 + 16 of length 2.
  ASSERT_EQ(space.size(), 21u);
  double total = 0;
  for (const auto& ws : space) {
    const double want = ws.sentence.empty() ? 1.0 / 5 : 1.0 / 25;
    EXPECT_NEAR(ws.prob, want, 1e-15);
    total += ws.prob;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Enumerate, NormalizedForRandomParameters) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = random_params({5, 3, 3}, 200 + seed, 2.0);
    double total = 0;
    for (const auto& ws : enumerate_output_space(p, {4, 4}, 3)) total += ws.prob;
    ASSERT_NEAR(total, 1.0, 1e-10);
    ASSERT_NEAR(oracle::total_probability(p, {4, 4}, 3), 1.0, 1e-10);
  }
}

TEST(Enumerate, ProbabilitiesMatchLogProb) {
  const auto p = random_params({5, 2, 2}, 21);
  for (const auto& ws : enumerate_output_space(p, {4}, 2))
    ASSERT_NEAR(std::log(ws.prob), log_prob(p, {4}, ws.sentence, 2), 1e-12);
}

TEST(Enumerate, MostProbableIsGreedyWhenUnique) {
  // Sharp parameters make the greedy path the unique argmax.
  ModelParams p({5, 2, 2});
  p.values()[p.output_bias_offset() + 4] = 5.0;
  p.values()[p.output_bias_offset() + kEos] = 4.0;
  const auto space = enumerate_output_space(p, {4}, 3);
  const auto best = std::max_element(space.begin(), space.end(),
                                     [](const auto& x, const auto& y) { return x.prob < y.prob; });
  EXPECT_EQ(best->sentence, greedy_decode(p, {4}, 3).sentence);
}

TEST(Enumerate, GuardRejectsLargeSpaces) {
  const auto p = init_params(20, 2, 2, 1);
  EXPECT_THROW(enumerate_output_space(p, {4}, 8), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto p = random_params({6, 3, 4}, 22, 3.0);
  const auto text = checkpoint_to_string(p);
  const auto q = checkpoint_from_string(text);
  EXPECT_EQ(p, q);
  const auto path = std::filesystem::temp_directory_path() / "docmrt_model_test.ckpt";
  save_checkpoint(p, path);
  EXPECT_EQ(load_checkpoint(path), p);
}

TEST(Checkpoint, MalformedInputThrows) {
  EXPECT_THROW(checkpoint_from_string("not a checkpoint"), std::invalid_argument);
  auto text = checkpoint_to_string(init_params(5, 1, 1, 1));
  text.resize(text.size() / 2);
  EXPECT_THROW(checkpoint_from_string(text), std::invalid_argument);
}
