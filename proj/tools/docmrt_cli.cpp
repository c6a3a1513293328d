// docmrt command-line interface.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "docmrt/harness.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace docmrt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;

/// Every experiment config key as a --flag; only flags actually given override.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key=value config file; flags override it");
    for (const auto& [key, def] : experiment_config_to_map(ExperimentConfig{}))
      options[key] = app->add_option("--" + key, values[key], "default: " + (def.empty() ? "unset" : def));
  }

  ConfigMap merged() const {
    ConfigMap map;
    if (!config_path.empty()) map = read_config_file(config_path);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) map[key] = values.at(key);
    return map;
  }

  ExperimentConfig resolve() const {
    auto cfg = experiment_config_from_map(merged());
    cfg.validate();
    return cfg;
  }
};

void emit(const std::string& json, const std::string& out) {
  if (out.empty()) {
    std::cout << json << '\n';
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << json << '\n';
}

Vocabulary load_vocab(const fs::path& path) {
  const auto lines = read_lines(path);
  Vocabulary vocab;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i < kNumReserved) {
      if (lines[i] != vocab.token(static_cast<TokenId>(i))) throw ValidationError("vocab file must start with the reserved tokens");
      continue;
    }
    vocab.add(lines[i]);
  }
  return vocab;
}

DocumentCorpus load_split(const fs::path& dir, const std::string& split, const Vocabulary& vocab) {
  try {
    return read_document_corpus(dir / (split + ".src"), dir / (split + ".ref"), dir / (split + ".docids"), vocab);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(split + ": " + e.what());
  }
}

void write_split(const fs::path& dir, const std::string& split, const DocumentCorpus& corpus,
                 const Vocabulary& vocab) {
  std::vector<std::string> src, ref, ids;
  for (const auto& e : corpus.entries) {
    src.push_back(decode(e.source, vocab));
    ref.push_back(decode(e.reference, vocab));
    ids.push_back(std::to_string(e.doc_id));
  }
  write_lines(dir / (split + ".src"), src);
  write_lines(dir / (split + ".ref"), ref);
  write_lines(dir / (split + ".docids"), ids);
}

nlohmann::ordered_json log_json(const FinetuneResult& res) {
  nlohmann::ordered_json j;
  j["updates"] = res.updates;
  if (res.best_heldout) j["best_heldout"] = *res.best_heldout;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : res.log) arr.push_back(nlohmann::ordered_json::parse(e.to_json()));
  j["log"] = arr;
  return j;
}

nlohmann::ordered_json scores_json(const HeldoutScores& s) {
  return {{"bleu", s.bleu}, {"ter", s.ter}, {"gleu", s.gleu}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document-level minimum risk training toolkit"};
  app.require_subcommand(1);
  std::string out;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic document translation task");
  ConfigFlags gen_flags;
  gen_flags.attach(gen);
  std::string gen_dir;
  gen->add_option("--out-dir", gen_dir, "Directory for split files")->required();
  gen->add_option("--out", out, "Write the JSON summary here instead of stdout");

  // train-mle
  auto* mle = app.add_subcommand("train-mle", "Train an MLE baseline with early stopping");
  ConfigFlags mle_flags;
  mle_flags.attach(mle);
  std::string mle_data, mle_ckpt;
  mle->add_option("--data-dir", mle_data, "Directory written by gen-data")->required();
  mle->add_option("--ckpt-out", mle_ckpt, "Checkpoint path")->required();
  mle->add_option("--out", out, "Write the JSON log here instead of stdout");

  // finetune-mrt
  auto* ft = app.add_subcommand("finetune-mrt", "Fine-tune a checkpoint with MLE, seq-MRT or doc-MRT");
  ConfigFlags ft_flags;
  ft_flags.attach(ft);
  std::string ft_data, ft_ckpt, ft_ckpt_out, ft_mode = "doc_mrt_ordered", ft_batching = "document";
  ft->add_option("--data-dir", ft_data, "Directory written by gen-data")->required();
  ft->add_option("--ckpt", ft_ckpt, "Starting checkpoint")->required();
  ft->add_option("--ckpt-out", ft_ckpt_out, "Fine-tuned checkpoint path")->required();
  ft->add_option("--mode", ft_mode, "mle | seq_mrt | doc_mrt_ordered | doc_mrt_random");
  ft->add_option("--batching", ft_batching, "document | random");
  ft->add_option("--out", out, "Write the JSON log here instead of stdout");

  // score
  auto* sc = app.add_subcommand("score", "Score hypotheses against references");
  std::string sc_hyp, sc_ref, sc_src, sc_docids, sc_metric = "bleu";
  std::size_t sc_pseudo = 0;
  sc->add_option("--hyp", sc_hyp)->required();
  sc->add_option("--ref", sc_ref)->required();
  sc->add_option("--src", sc_src, "Source file (GLEU)");
  sc->add_option("--docids", sc_docids, "Doc-id sidecar; without it the file is one document");
  sc->add_option("--pseudo-docs", sc_pseudo, "Without --docids, group every S consecutive lines");
  sc->add_option("--metric", sc_metric, "bleu | ter | gleu");
  sc->add_option("--out", out);

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of analytic gradients");
  GradCheckConfig gcc;
  gc->add_option("--vocab-size", gcc.vocab);
  gc->add_option("--embed-dim", gcc.embed);
  gc->add_option("--hidden-dim", gcc.hidden);
  gc->add_option("--max-len", gcc.max_len);
  gc->add_option("--coords", gcc.coords);
  gc->add_option("--eps", gcc.eps);
  gc->add_option("--seed", gcc.seed);
  gc->add_option("--corrupt", gcc.corrupt, "Add this to one analytic coordinate (self-test)");
  gc->add_option("--out", out);

  // enum-check
  auto* ec = app.add_subcommand("enum-check", "Normalization, null-cost and unbiasedness checks by enumeration");
  EnumCheckConfig ecc;
  ec->add_option("--vocab-size", ecc.vocab);
  ec->add_option("--max-len", ecc.max_len);
  ec->add_option("--samples", ecc.samples);
  ec->add_option("--batch-sentences", ecc.sentences);
  ec->add_option("--trials", ecc.trials);
  ec->add_option("--thetas", ecc.thetas);
  ec->add_option("--seed", ecc.seed);
  ec->add_option("--out", out);

  // run-experiment
  auto* rx = app.add_subcommand("run-experiment", "Baseline plus one fine-tuning run per mode; JSON report");
  ConfigFlags rx_flags;
  rx_flags.attach(rx);
  std::string rx_dir;
  rx->add_option("--out-dir", rx_dir, "Also save decoded outputs and references here");
  rx->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (gen->parsed()) {
      auto cfg = gen_flags.resolve();
      TaskSpec task = cfg.task;
      task.seed = cfg.seed;
      const auto corpus = generate_synthetic_corpus(task);
      fs::create_directories(gen_dir);
      write_lines(fs::path(gen_dir) / "vocab.txt", corpus.vocab.tokens());
      write_split(gen_dir, "train", corpus.train, corpus.vocab);
      write_split(gen_dir, "valid", corpus.valid, corpus.vocab);
      write_split(gen_dir, "test", corpus.test, corpus.vocab);
      nlohmann::ordered_json j;
      j["out_dir"] = gen_dir;
      j["seed"] = task.seed;
      j["vocab_size"] = corpus.vocab.size();
      j["train_sentences"] = corpus.train.size();
      j["valid_sentences"] = corpus.valid.size();
      j["test_sentences"] = corpus.test.size();
      emit(j.dump(2), out);
    } else if (mle->parsed()) {
      auto cfg = mle_flags.resolve();
      const auto vocab = load_vocab(fs::path(mle_data) / "vocab.txt");
      cfg.task.vocab_size = static_cast<int>(vocab.size());
      const auto train = load_split(mle_data, "train", vocab);
      const auto valid = load_split(mle_data, "valid", vocab);
      const auto res = train_mle_baseline(cfg, train, valid);
      save_checkpoint(res.params, mle_ckpt);
      auto j = log_json(res);
      j["valid"] = scores_json(score_hypotheses(
          valid, decode_corpus(res.params, valid, static_cast<int>(cfg.beam), cfg.max_len)));
      emit(j.dump(2), out);
    } else if (ft->parsed()) {
      auto cfg = ft_flags.resolve();
      const auto vocab = load_vocab(fs::path(ft_data) / "vocab.txt");
      const auto train = load_split(ft_data, "train", vocab);
      const auto valid = load_split(ft_data, "valid", vocab);
      const auto initial = load_checkpoint(ft_ckpt);
      if (initial.dims().vocab != static_cast<int>(vocab.size()))
        throw ValidationError("checkpoint vocabulary size does not match the data directory");
      TrainConfig tc = cfg.finetune;
      tc.max_len = cfg.max_len;
      tc.seed = cfg.seed;
      try {
        tc.mode = parse_train_mode(ft_mode);
        tc.batching = parse_batching_mode(ft_batching);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      HeldoutMonitor monitor;
      const int beam = static_cast<int>(cfg.beam);
      if (cfg.finetune_eval_every > 0) {
        monitor.every = cfg.finetune_eval_every;
        monitor.keep_best = cfg.finetune_keep_best;
        monitor.higher_is_better = metric_higher_is_better(tc.cost_kind);
        monitor.evaluate = [&](const ModelParams& p) {
          return metric_for_cost(tc.cost_kind, score_hypotheses(valid, decode_corpus(p, valid, beam, cfg.max_len)));
        };
      }
      const auto res = finetune(initial, train, tc, monitor);
      save_checkpoint(res.params, ft_ckpt_out);
      auto j = log_json(res);
      j["valid"] = scores_json(score_hypotheses(valid, decode_corpus(res.params, valid, beam, cfg.max_len)));
      emit(j.dump(2), out);
    } else if (sc->parsed()) {
      MetricKind metric;
      try {
        metric = parse_metric_kind(sc_metric);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      std::optional<fs::path> src, docids;
      if (!sc_src.empty()) src = sc_src;
      if (!sc_docids.empty()) docids = sc_docids;
      std::optional<std::size_t> pseudo;
      if (sc_pseudo > 0) pseudo = sc_pseudo;
      emit(score_corpus(sc_hyp, sc_ref, src, docids, metric, pseudo).to_json(), out);
    } else if (gc->parsed()) {
      const auto report = grad_check(gcc);
      emit(report.to_json(), out);
      return report.passed() ? kExitOk : kExitValidation;
    } else if (ec->parsed()) {
      const auto report = enum_check(ecc);
      emit(report.to_json(), out);
      return report.passed() ? kExitOk : kExitValidation;
    } else if (rx->parsed()) {
      const auto cfg = rx_flags.resolve();
      ExperimentArtifacts artifacts;
      const auto report = run_experiment(cfg, rx_dir.empty() ? nullptr : &artifacts);
      if (!rx_dir.empty()) write_experiment_outputs(report, artifacts, rx_dir);
      emit(report.to_json(), out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}
