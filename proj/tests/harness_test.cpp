#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "docmrt/batching.hpp"
#include "docmrt/harness.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace docmrt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "docmrt_harness_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

TaskSpec small_task() {
  TaskSpec t;
  t.vocab_size = 12;
  t.train_docs = 30;
  t.valid_docs = 5;
  t.test_docs = 6;
  t.max_len = 5;
  t.seed = 3;
  return t;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.task = small_task();
  cfg.embed_dim = 4;
  cfg.hidden_dim = 6;
  cfg.max_len = 6;
  cfg.beam = 2;
  cfg.mle_max_updates = 30;
  cfg.mle_eval_every = 10;
  cfg.mle_batch_sentences = 8;
  cfg.finetune.max_updates = 5;
  cfg.finetune.max_len = cfg.max_len;
  cfg.finetune.learning_rate = 0.05;
  cfg.batchings = {BatchingMode::Document, BatchingMode::Random};
  cfg.seed = 5;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DOCMRT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---- synthetic task ----

TEST(Synthetic, CopyRuleWithoutNoise) {
  auto t = small_task();
  t.rule = 0;
  t.style_consistency = false;
  const auto c = generate_synthetic_corpus(t);
  for (const auto* split : {&c.train, &c.valid, &c.test})
    for (const auto& e : split->entries) ASSERT_EQ(e.source, e.reference);
}

TEST(Synthetic, ReverseRule) {
  std::vector<TokenId> id(8);
  std::iota(id.begin(), id.end(), 0);
  EXPECT_EQ(transduce({4, 5, 6}, TransductionRule::Reverse, id), (Sentence{6, 5, 4}));
  EXPECT_EQ(transduce({4, 5, 6}, TransductionRule::Copy, id), (Sentence{4, 5, 6}));
}

TEST(Synthetic, StyleConsistencySharesVariantPerDocument) {
  auto t = small_task();
  t.style_bias = 0.5;
  const auto c = generate_synthetic_corpus(t);
  EXPECT_NE(c.primary_table, c.secondary_table);
  std::set<int> variants;
  for (const auto& e : c.train.entries) {
    const int v = c.doc_variant.at(e.doc_id);
    variants.insert(v);
    const auto& table = v == 0 ? c.primary_table : c.secondary_table;
    ASSERT_EQ(e.reference, transduce(e.source, TransductionRule::Cipher, table));
  }
  EXPECT_EQ(variants.size(), 2u);
}

TEST(Synthetic, SourcesAreContentTokensWithinLengthBounds) {
  const auto t = small_task();
  const auto c = generate_synthetic_corpus(t);
  EXPECT_EQ(c.vocab.size(), 12u);
  EXPECT_EQ(c.train.size(), t.train_docs * t.sentences_per_doc);
  for (const auto& e : c.train.entries) {
    ASSERT_GE(static_cast<int>(e.source.size()), t.min_len);
    ASSERT_LE(static_cast<int>(e.source.size()), t.max_len);
    for (auto tok : e.source) ASSERT_GE(tok, static_cast<TokenId>(kNumReserved));
  }
}

TEST(Synthetic, DeterministicAndSplitsDisjoint) {
  const auto a = generate_synthetic_corpus(small_task());
  const auto b = generate_synthetic_corpus(small_task());
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    ASSERT_EQ(a.train.entries[i].source, b.train.entries[i].source);
    ASSERT_EQ(a.train.entries[i].reference, b.train.entries[i].reference);
  }
  std::set<int> train_ids, other_ids;
  for (const auto& e : a.train.entries) train_ids.insert(e.doc_id);
  for (const auto* split : {&a.valid, &a.test})
    for (const auto& e : split->entries) other_ids.insert(e.doc_id);
  for (int id : other_ids) EXPECT_EQ(train_ids.count(id), 0u);
}

TEST(Synthetic, NoiseOnlyInTrain) {
  auto t = small_task();
  t.noise = 0.5;
  const auto c = generate_synthetic_corpus(t);
  auto mismatches = [&](const DocumentCorpus& split) {
    int bad = 0;
    for (const auto& e : split.entries) {
      const auto& table = c.doc_variant.at(e.doc_id) == 0 ? c.primary_table : c.secondary_table;
      bad += e.reference != transduce(e.source, TransductionRule::Cipher, table);
    }
    return bad;
  };
  EXPECT_GT(mismatches(c.train), 0);
  EXPECT_EQ(mismatches(c.valid), 0);
  EXPECT_EQ(mismatches(c.test), 0);
}

TEST(Synthetic, InvalidRuleThrows) {
  auto t = small_task();
  t.rule = 7;
  EXPECT_THROW(generate_synthetic_corpus(t), ValidationError);
  EXPECT_THROW(t.validate(10), ValidationError);
}

// ---- batching ----

TEST(Batching, PartitionInBothModes) {
  const auto c = generate_synthetic_corpus(small_task());
  for (auto mode : {BatchingMode::Random, BatchingMode::Document}) {
    const auto idx = make_batch_indices(c.train, mode, 3, 11);
    std::vector<int> seen(c.train.size(), 0);
    for (const auto& b : idx) {
      ASSERT_LE(b.size(), 3u);
      for (auto i : b) ++seen[i];
    }
    for (int s : seen) ASSERT_EQ(s, 1);
  }
}

TEST(Batching, DocumentModeKeepsOneDocument) {
  const auto c = generate_synthetic_corpus(small_task());
  for (const auto& b : make_batches(c.train, BatchingMode::Document, 3, 2)) {
    ASSERT_GE(b.doc_id, 0);
  }
  const auto idx = make_batch_indices(c.train, BatchingMode::Document, 3, 2);
  for (const auto& b : idx)
    for (auto i : b) ASSERT_EQ(c.train.entries[i].doc_id, c.train.entries[b.front()].doc_id);
}

TEST(Batching, RandomModeDeterministicPerSeed) {
  const auto c = generate_synthetic_corpus(small_task());
  EXPECT_EQ(make_batch_indices(c.train, BatchingMode::Random, 4, 1),
            make_batch_indices(c.train, BatchingMode::Random, 4, 1));
  EXPECT_NE(make_batch_indices(c.train, BatchingMode::Random, 4, 1),
            make_batch_indices(c.train, BatchingMode::Random, 4, 2));
}

TEST(Batching, Errors) {
  EXPECT_THROW(make_batches(DocumentCorpus{}, BatchingMode::Random, 2, 1), std::invalid_argument);
  const auto c = generate_synthetic_corpus(small_task());
  EXPECT_THROW(make_batches(c.train, BatchingMode::Random, 0, 1), std::invalid_argument);
  EXPECT_THROW(parse_batching_mode("sorted"), std::invalid_argument);
}

// ---- configuration ----

TEST(Config, ParseText) {
  const auto m = parse_config_text("# comment\nseed = 4\n\nmodes=mle,seq_mrt  # trailing\n");
  EXPECT_EQ(m.at("seed"), "4");
  EXPECT_EQ(m.at("modes"), "mle,seq_mrt");
  EXPECT_THROW(parse_config_text("no equals sign"), ValidationError);
}

TEST(Config, RoundTrip) {
  auto cfg = tiny_experiment();
  cfg.finetune_style_bias = 0.8;
  cfg.finetune.sharpness = 0.125;
  const auto map = experiment_config_to_map(cfg);
  const auto back = experiment_config_from_map(map);
  EXPECT_EQ(experiment_config_to_map(back), map);
  EXPECT_EQ(back.finetune_style_bias, 0.8);
  EXPECT_EQ(back.batchings.size(), 2u);
}

TEST(Config, UnknownKeyAndBadValues) {
  EXPECT_THROW(experiment_config_from_map({{"bogus", "1"}}), ValidationError);
  EXPECT_THROW(experiment_config_from_map({{"samples", "many"}}), ValidationError);
  auto cfg = tiny_experiment();
  cfg.finetune.samples = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

// ---- scoring ----

TEST(Scoring, IdentityFiles) {
  const auto dir = scratch("identity");
  write_file(dir / "a.txt", "w4 w5 w6 w7\nw8 w9 w4\nw5 w6 w7 w8 w9\n");
  write_file(dir / "ids.txt", "0\n0\n1\n");
  const auto bleu = score_corpus(dir / "a.txt", dir / "a.txt", std::nullopt, dir / "ids.txt", MetricKind::Bleu);
  EXPECT_DOUBLE_EQ(bleu.corpus, 1.0);
  ASSERT_EQ(bleu.per_document.size(), 2u);
  const auto ter = score_corpus(dir / "a.txt", dir / "a.txt", std::nullopt, std::nullopt, MetricKind::Ter);
  EXPECT_DOUBLE_EQ(ter.corpus, 0.0);
  EXPECT_EQ(ter.sentences, 3u);
}

TEST(Scoring, MatchesMetricsModule) {
  const auto dir = scratch("delegation");
  write_file(dir / "hyp.txt", "w4 w5 w6\nw7 w8\nw9 w4 w5 w6\n");
  write_file(dir / "ref.txt", "w4 w5 w7\nw7 w8 w9\nw9 w4 w6 w5\n");
  write_file(dir / "src.txt", "w4 w4\nw8\nw9 w5\n");
  Vocabulary v;
  for (const auto* f : {"hyp.txt", "ref.txt", "src.txt"})
    for (const auto& line : read_lines(dir / f))
      for (std::size_t i = 0, j; i < line.size(); i = j + 1) {
        j = line.find(' ', i);
        if (j == std::string::npos) j = line.size();
        v.add(line.substr(i, j - i));
      }
  auto load = [&](const char* f) {
    std::vector<Sentence> out;
    for (const auto& line : read_lines(dir / f)) out.push_back(encode(line, v));
    return out;
  };
  const auto h = load("hyp.txt"), r = load("ref.txt"), s = load("src.txt");
  EXPECT_DOUBLE_EQ(score_corpus(dir / "hyp.txt", dir / "ref.txt", {}, {}, MetricKind::Bleu).corpus,
                   corpus_bleu(h, r).value);
  EXPECT_DOUBLE_EQ(score_corpus(dir / "hyp.txt", dir / "ref.txt", {}, {}, MetricKind::Ter).corpus,
                   doc_ter(h, r).value);
  EXPECT_DOUBLE_EQ(score_corpus(dir / "hyp.txt", dir / "ref.txt", dir / "src.txt", {}, MetricKind::Gleu).corpus,
                   gleu(h, s, r).value);
}

TEST(Scoring, PerDocumentTerPoolsToCorpus) {
  const auto dir = scratch("pooling");
  write_file(dir / "hyp.txt", "w4 w5 w6 w9\nw4 w5 w6 w7 w8 w9\nw4\n");
  write_file(dir / "ref.txt", "w4 w5 w6 w7\nw4 w5 w6 w7 w8 w9\nw5 w6\n");
  write_file(dir / "ids.txt", "0\n0\n1\n");
  const auto rep = score_corpus(dir / "hyp.txt", dir / "ref.txt", {}, dir / "ids.txt", MetricKind::Ter);
  ASSERT_EQ(rep.per_document.size(), 2u);
  // doc 0: 1 edit over 10 reference words; doc 1: 2 edits over 2.
  EXPECT_DOUBLE_EQ(rep.per_document[0].second, 0.1);
  EXPECT_DOUBLE_EQ(rep.per_document[1].second, 1.0);
  const double pooled = (rep.per_document[0].second * 10 + rep.per_document[1].second * 2) / 12;
  EXPECT_DOUBLE_EQ(rep.corpus, pooled);
}

TEST(Scoring, PseudoDocuments) {
  const auto dir = scratch("pseudo");
  write_file(dir / "a.txt", "w4\nw5\nw6\nw7\nw8\n");
  const auto rep = score_corpus(dir / "a.txt", dir / "a.txt", {}, {}, MetricKind::Ter, 2);
  EXPECT_EQ(rep.per_document.size(), 3u);
}

TEST(Scoring, Errors) {
  const auto dir = scratch("errors");
  write_file(dir / "a.txt", "w4\nw5\n");
  write_file(dir / "b.txt", "w4\n");
  EXPECT_THROW(score_corpus(dir / "a.txt", dir / "b.txt", {}, {}, MetricKind::Bleu), std::invalid_argument);
  EXPECT_THROW(score_corpus(dir / "a.txt", dir / "a.txt", {}, {}, MetricKind::Gleu), ValidationError);
  EXPECT_THROW(score_corpus(dir / "a.txt", dir / "missing.txt", {}, {}, MetricKind::Bleu), std::runtime_error);
}

TEST(Scoring, JsonSchema) {
  const auto dir = scratch("schema");
  write_file(dir / "a.txt", "w4 w5\nw6\n");
  write_file(dir / "ids.txt", "0\n1\n");
  const auto j = nlohmann::json::parse(score_corpus(dir / "a.txt", dir / "a.txt", {}, dir / "ids.txt",
                                                    MetricKind::Bleu)
                                           .to_json());
  EXPECT_EQ(j.at("metric"), "bleu");
  EXPECT_EQ(j.at("sentences"), 2);
  EXPECT_EQ(j.at("documents").size(), 2u);
}

// ---- experiment ----

TEST(Experiment, ReportSchemaAndDeterminism) {
  const auto cfg = tiny_experiment();
  ExperimentArtifacts art;
  const auto report = run_experiment(cfg, &art);
  const auto again = run_experiment(cfg);
  EXPECT_EQ(report.to_json(), again.to_json());

  const auto j = nlohmann::json::parse(report.to_json());
  EXPECT_EQ(j.at("seed"), cfg.seed);
  ASSERT_EQ(j.at("rows").size(), cfg.modes.size() * cfg.batchings.size());
  for (const auto& row : j.at("rows"))
    for (const char* key : {"mode", "batching", "bleu", "ter", "gleu", "updates", "final_risk"})
      EXPECT_TRUE(row.contains(key)) << key;
  EXPECT_TRUE(j.at("baseline").contains("bleu"));
  EXPECT_FALSE(j.contains("wall_clock_seconds"));
  EXPECT_EQ(art.decoded.size(), 1 + report.rows.size());
  EXPECT_EQ(art.finetuned.size(), report.rows.size());
}

TEST(Experiment, ScoresReproduceFromWrittenOutputs) {
  auto cfg = tiny_experiment();
  cfg.modes = {TrainMode::DocMrtOrdered};
  cfg.batchings = {BatchingMode::Document};
  ExperimentArtifacts art;
  const auto report = run_experiment(cfg, &art);
  const auto dir = scratch("outputs");
  write_experiment_outputs(report, art, dir);

  auto rescore = [&](const std::string& hyp, MetricKind m) {
    return score_corpus(dir / hyp, dir / "test.ref", dir / "test.src", std::nullopt, m).corpus;
  };
  EXPECT_NEAR(rescore("baseline.hyp", MetricKind::Bleu), report.baseline.bleu, 1e-12);
  EXPECT_NEAR(rescore("baseline.hyp", MetricKind::Ter), report.baseline.ter, 1e-12);
  EXPECT_NEAR(rescore("doc_mrt_ordered.document.hyp", MetricKind::Gleu), report.rows[0].scores.gleu, 1e-12);
  EXPECT_EQ(load_checkpoint(dir / "baseline.ckpt"), art.baseline);
  EXPECT_TRUE(fs::exists(dir / "report.json"));
}

TEST(Experiment, MetricForCost) {
  const HeldoutScores s{0.3, 0.6, 0.2};
  EXPECT_EQ(metric_for_cost(CostKind::OneMinusDocBleu, s), 0.3);
  EXPECT_EQ(metric_for_cost(CostKind::SentTer, s), 0.6);
  EXPECT_EQ(metric_for_cost(CostKind::OneMinusDocGleu, s), 0.2);
  EXPECT_FALSE(metric_higher_is_better(CostKind::DocTer));
  EXPECT_TRUE(metric_higher_is_better(CostKind::OneMinusSentBleu));
}

// ---- verification commands ----

TEST(GradCheck, DefaultPassesAndCorruptionFails) {
  const auto ok = grad_check({});
  EXPECT_TRUE(ok.passed());
  ASSERT_EQ(ok.entries.size(), 3u);
  for (const auto& e : ok.entries) EXPECT_GT(e.coords_checked, 0u);
  GradCheckConfig bad;
  bad.corrupt = 1e-3;
  const auto broken = grad_check(bad);
  EXPECT_FALSE(broken.passed());
  for (const auto& e : broken.entries) EXPECT_FALSE(e.pass) << e.function;
  const auto j = nlohmann::json::parse(ok.to_json());
  ASSERT_EQ(j.at("checks").size(), 3u);
  EXPECT_EQ(j.at("passed"), true);
  EXPECT_TRUE(j.at("checks")[0].contains("max_rel_error"));
}

// ---- command line ----

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  write_file(dir / "a.txt", "w4 w5\nw6\n");
  write_file(dir / "b.txt", "w4\n");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("score --hyp " + (dir / "a.txt").string() + " --ref " + (dir / "a.txt").string() +
                    " --out " + (dir / "s.json").string()),
            0);
  EXPECT_EQ(run_cli("score --hyp " + (dir / "a.txt").string() + " --ref " + (dir / "b.txt").string()), 2);
  EXPECT_EQ(run_cli("score --hyp " + (dir / "a.txt").string() + " --ref " + (dir / "a.txt").string() +
                    " --metric gleu"),
            2);
  EXPECT_EQ(run_cli("score --bogus-flag"), 2);
  EXPECT_EQ(run_cli("grad-check --corrupt 0.001"), 2);
  EXPECT_EQ(run_cli("grad-check --out " + (dir / "g.json").string()), 0);
  EXPECT_EQ(run_cli("score --hyp " + (dir / "nope.txt").string() + " --ref " + (dir / "a.txt").string()), 1);
}

TEST(Cli, GenDataWritesSplits) {
  const auto dir = scratch("gen");
  ASSERT_EQ(run_cli("gen-data --train-docs 3 --valid-docs 1 --test-docs 1 --out-dir " + dir.string() + " --out " +
                    (dir / "summary.json").string()),
            0);
  for (const char* f : {"vocab.txt", "train.src", "train.ref", "train.docids", "test.src"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(read_lines(dir / "train.src").size(), 12u);
}
