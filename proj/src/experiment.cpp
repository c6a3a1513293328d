#include <array>
#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>

#include "docmrt/harness.hpp"
#include "json.hpp"

namespace docmrt {

// ---- configuration ------------------------------------------------------------

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto toks = split_whitespace(line);
    if (toks.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
    map[key] = trim(line.substr(eq + 1));
  }
  return map;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ValidationError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ValidationError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& value, Parse parse) {
  std::vector<T> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(parse(item));
  return out;
}

template <class T, class Fmt>
std::string join(const std::vector<T>& items, Fmt fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

struct Binding {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Binding integral(const char* key, T ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

#define DOCMRT_FIELD(key, expr, type)                                                              \
  Binding {                                                                                        \
    key, [](ExperimentConfig& c, const std::string& v) { expr = parse_number<type>(key, v); },     \
        [](const ExperimentConfig& c) -> std::string {                                             \
          if constexpr (std::is_floating_point_v<type>) return format_double(expr);                \
          else return std::to_string(expr);                                                        \
        }                                                                                          \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      DOCMRT_FIELD("vocab-size", c.task.vocab_size, int),
      DOCMRT_FIELD("min-len", c.task.min_len, int),
      DOCMRT_FIELD("max-sent-len", c.task.max_len, int),
      DOCMRT_FIELD("doc-sentences", c.task.sentences_per_doc, std::size_t),
      DOCMRT_FIELD("train-docs", c.task.train_docs, std::size_t),
      DOCMRT_FIELD("valid-docs", c.task.valid_docs, std::size_t),
      DOCMRT_FIELD("test-docs", c.task.test_docs, std::size_t),
      DOCMRT_FIELD("rule", c.task.rule, int),
      Binding{"style-consistency",
              [](ExperimentConfig& c, const std::string& v) { c.task.style_consistency = parse_bool("style-consistency", v); },
              [](const ExperimentConfig& c) { return std::string(c.task.style_consistency ? "true" : "false"); }},
      DOCMRT_FIELD("style-bias", c.task.style_bias, double),
      DOCMRT_FIELD("noise", c.task.noise, double),
      Binding{"finetune-style-bias",
              [](ExperimentConfig& c, const std::string& v) {
                if (v.empty())
                  c.finetune_style_bias.reset();
                else
                  c.finetune_style_bias = parse_number<double>("finetune-style-bias", v);
              },
              [](const ExperimentConfig& c) {
                return c.finetune_style_bias ? format_double(*c.finetune_style_bias) : std::string();
              }},
      DOCMRT_FIELD("embed-dim", c.embed_dim, int),
      DOCMRT_FIELD("hidden-dim", c.hidden_dim, int),
      DOCMRT_FIELD("max-len", c.max_len, int),
      DOCMRT_FIELD("beam", c.beam, std::size_t),
      DOCMRT_FIELD("mle-lr", c.mle_learning_rate, double),
      DOCMRT_FIELD("mle-updates", c.mle_max_updates, std::size_t),
      DOCMRT_FIELD("mle-eval-every", c.mle_eval_every, std::size_t),
      DOCMRT_FIELD("mle-patience", c.mle_patience, std::size_t),
      DOCMRT_FIELD("mle-batch-sentences", c.mle_batch_sentences, std::size_t),
      DOCMRT_FIELD("samples", c.finetune.samples, std::size_t),
      DOCMRT_FIELD("batch-sentences", c.finetune.batch_sentences, std::size_t),
      DOCMRT_FIELD("temperature", c.finetune.temperature, double),
      DOCMRT_FIELD("sharpness", c.finetune.sharpness, double),
      Binding{"estimator", [](ExperimentConfig& c, const std::string& v) { c.finetune.estimator = parse_estimator(v); },
              [](const ExperimentConfig& c) { return std::string(to_string(c.finetune.estimator)); }},
      Binding{"cost", [](ExperimentConfig& c, const std::string& v) { c.finetune.cost_kind = parse_cost_kind(v); },
              [](const ExperimentConfig& c) { return std::string(to_string(c.finetune.cost_kind)); }},
      DOCMRT_FIELD("learning-rate", c.finetune.learning_rate, double),
      DOCMRT_FIELD("accumulation", c.finetune.accumulation, std::size_t),
      DOCMRT_FIELD("max-updates", c.finetune.max_updates, std::size_t),
      Binding{"modes",
              [](ExperimentConfig& c, const std::string& v) {
                c.modes = parse_list<TrainMode>(v, [](const std::string& s) { return parse_train_mode(s); });
              },
              [](const ExperimentConfig& c) {
                return join(c.modes, [](TrainMode m) { return std::string(to_string(m)); });
              }},
      Binding{"batchings",
              [](ExperimentConfig& c, const std::string& v) {
                c.batchings = parse_list<BatchingMode>(v, [](const std::string& s) { return parse_batching_mode(s); });
              },
              [](const ExperimentConfig& c) {
                return join(c.batchings, [](BatchingMode m) { return std::string(to_string(m)); });
              }},
      DOCMRT_FIELD("eval-every", c.finetune_eval_every, std::size_t),
      Binding{"keep-best",
              [](ExperimentConfig& c, const std::string& v) { c.finetune_keep_best = parse_bool("keep-best", v); },
              [](const ExperimentConfig& c) { return std::string(c.finetune_keep_best ? "true" : "false"); }},
      DOCMRT_FIELD("seed", c.seed, std::uint64_t),
      Binding{"timing", [](ExperimentConfig& c, const std::string& v) { c.timing = parse_bool("timing", v); },
              [](const ExperimentConfig& c) { return std::string(c.timing ? "true" : "false"); }},
  };
  return table;
}

#undef DOCMRT_FIELD

}  // namespace

void ExperimentConfig::validate() const {
  task.validate(max_len);
  if (finetune_style_bias && (*finetune_style_bias < 0 || *finetune_style_bias > 1))
    throw ValidationError("invalid config: finetune-style-bias must lie in [0, 1]");
  if (embed_dim < 1 || hidden_dim < 1) throw ValidationError("invalid config: model dimensions must be >= 1");
  if (beam < 1) throw ValidationError("invalid config: beam must be >= 1");
  if (!(mle_learning_rate > 0)) throw ValidationError("invalid config: mle-lr must be > 0");
  if (mle_batch_sentences < 1) throw ValidationError("invalid config: mle-batch-sentences must be >= 1");
  if (modes.empty() || batchings.empty()) throw ValidationError("invalid config: modes and batchings must be non-empty");
  TrainConfig tc = finetune;
  tc.max_len = max_len;
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

ExperimentConfig experiment_config_from_map(const ConfigMap& map) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : map) {
    auto it = std::find_if(bindings().begin(), bindings().end(), [&](const Binding& b) { return key == b.key; });
    if (it == bindings().end()) throw ValidationError("unknown config key '" + key + "'");
    try {
      it->set(cfg, value);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ValidationError("config key '" + key + "': " + e.what());
    }
  }
  cfg.finetune.max_len = cfg.max_len;
  cfg.finetune.seed = cfg.seed;
  return cfg;
}

ConfigMap experiment_config_to_map(const ExperimentConfig& cfg) {
  ConfigMap map;
  for (const auto& b : bindings()) map[b.key] = b.get(cfg);
  return map;
}

// ---- evaluation -------------------------------------------------------------------

std::vector<Sentence> decode_corpus(const ModelParams& params, const DocumentCorpus& corpus, int beam, int max_len) {
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (const auto& e : corpus.entries) {
    auto hyps = beam_decode(params, e.source, beam, max_len);
    out.push_back(hyps.empty() ? Sentence{} : std::move(hyps.front().sentence));
  }
  return out;
}

HeldoutScores score_hypotheses(const DocumentCorpus& corpus, const std::vector<Sentence>& hyps) {
  std::vector<Sentence> refs;
  std::vector<Sentence> srcs;
  for (const auto& e : corpus.entries) {
    refs.push_back(e.reference);
    srcs.push_back(e.source);
  }
  HeldoutScores s;
  s.bleu = corpus_bleu(hyps, refs).value;
  s.ter = doc_ter(hyps, refs).value;
  s.gleu = gleu(hyps, srcs, refs).value;
  return s;
}

double metric_for_cost(CostKind kind, const HeldoutScores& scores) {
  switch (kind) {
    case CostKind::SentTer:
    case CostKind::DocTer:
      return scores.ter;
    case CostKind::OneMinusSentGleu:
    case CostKind::OneMinusDocGleu:
      return scores.gleu;
    default:
      return scores.bleu;
  }
}

bool metric_higher_is_better(CostKind kind) { return kind != CostKind::SentTer && kind != CostKind::DocTer; }

// ---- experiments --------------------------------------------------------------------

FinetuneResult train_mle_baseline(const ExperimentConfig& cfg, const DocumentCorpus& train,
                                  const DocumentCorpus& valid) {
  auto params = init_params(cfg.task.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.seed);
  TrainConfig tc;
  tc.mode = TrainMode::Mle;
  tc.batching = BatchingMode::Random;
  tc.batch_sentences = cfg.mle_batch_sentences;
  tc.learning_rate = cfg.mle_learning_rate;
  tc.max_updates = cfg.mle_max_updates;
  tc.max_len = cfg.max_len;
  tc.seed = cfg.seed;
  HeldoutMonitor monitor;
  monitor.every = cfg.mle_eval_every;
  monitor.patience = cfg.mle_patience;
  monitor.keep_best = true;
  monitor.higher_is_better = true;
  const int beam = static_cast<int>(cfg.beam);
  monitor.evaluate = [&](const ModelParams& p) {
    return score_hypotheses(valid, decode_corpus(p, valid, beam, cfg.max_len)).bleu;
  };
  return finetune(std::move(params), train, tc, monitor);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, ExperimentArtifacts* artifacts) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();

  TaskSpec task = cfg.task;
  task.seed = cfg.seed;
  SyntheticCorpus base_corpus = generate_synthetic_corpus(task);
  SyntheticCorpus shifted;
  if (cfg.finetune_style_bias) {
    TaskSpec ft = task;
    ft.style_bias = *cfg.finetune_style_bias;
    shifted = generate_synthetic_corpus(ft);
  }
  const SyntheticCorpus& ft_corpus = cfg.finetune_style_bias ? shifted : base_corpus;

  ExperimentReport report;
  report.seed = cfg.seed;
  report.config = experiment_config_to_map(cfg);

  auto baseline = train_mle_baseline(cfg, base_corpus.train, base_corpus.valid);
  report.baseline_updates = baseline.updates;
  const int beam = static_cast<int>(cfg.beam);
  auto base_hyps = decode_corpus(baseline.params, ft_corpus.test, beam, cfg.max_len);
  report.baseline = score_hypotheses(ft_corpus.test, base_hyps);
  if (artifacts) {
    artifacts->baseline = baseline.params;
    artifacts->decoded.push_back(base_hyps);
  }

  for (auto batching : cfg.batchings) {
    for (auto mode : cfg.modes) {
      TrainConfig tc = cfg.finetune;
      tc.mode = mode;
      tc.batching = batching;
      tc.max_len = cfg.max_len;
      tc.seed = cfg.seed;
      HeldoutMonitor monitor;
      if (cfg.finetune_eval_every > 0) {
        monitor.every = cfg.finetune_eval_every;
        monitor.keep_best = cfg.finetune_keep_best;
        monitor.higher_is_better = metric_higher_is_better(tc.cost_kind);
        monitor.evaluate = [&, kind = tc.cost_kind](const ModelParams& p) {
          return metric_for_cost(kind, score_hypotheses(ft_corpus.valid,
                                                        decode_corpus(p, ft_corpus.valid, beam, cfg.max_len)));
        };
      }
      auto res = finetune(baseline.params, ft_corpus.train, tc, monitor);
      auto hyps = decode_corpus(res.params, ft_corpus.test, beam, cfg.max_len);
      ExperimentRow row;
      row.mode = mode;
      row.batching = batching;
      row.scores = score_hypotheses(ft_corpus.test, hyps);
      row.updates = res.updates;
      row.final_risk = res.log.empty() ? 0.0 : res.log.back().risk;
      report.rows.push_back(row);
      if (artifacts) {
        artifacts->finetuned.push_back(std::move(res.params));
        artifacts->decoded.push_back(std::move(hyps));
      }
    }
  }
  if (artifacts) artifacts->corpus = ft_corpus;
  if (cfg.timing)
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string ExperimentReport::to_json() const {
  auto scores = [](const HeldoutScores& s) {
    nlohmann::ordered_json j;
    j["bleu"] = s.bleu;
    j["ter"] = s.ter;
    j["gleu"] = s.gleu;
    return j;
  };
  nlohmann::ordered_json j;
  j["seed"] = seed;
  nlohmann::ordered_json c;
  for (const auto& [k, v] : config) c[k] = v;
  j["config"] = c;
  auto base = scores(baseline);
  base["updates"] = baseline_updates;
  j["baseline"] = base;
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["mode"] = std::string(docmrt::to_string(r.mode));
    row["batching"] = std::string(docmrt::to_string(r.batching));
    const auto s = scores(r.scores);
    for (auto it = s.begin(); it != s.end(); ++it) row[it.key()] = it.value();
    row["updates"] = r.updates;
    row["final_risk"] = r.final_risk;
    rows_json.push_back(row);
  }
  j["rows"] = rows_json;
  if (wall_clock_seconds) j["wall_clock_seconds"] = *wall_clock_seconds;
  return j.dump(2);
}

void write_experiment_outputs(const ExperimentReport& report, const ExperimentArtifacts& artifacts,
                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& corpus = artifacts.corpus.test;
  const auto& vocab = artifacts.corpus.vocab;
  std::vector<std::string> src, ref, ids;
  for (const auto& e : corpus.entries) {
    src.push_back(decode(e.source, vocab));
    ref.push_back(decode(e.reference, vocab));
    ids.push_back(std::to_string(e.doc_id));
  }
  write_lines(dir / "test.src", src);
  write_lines(dir / "test.ref", ref);
  write_lines(dir / "test.docids", ids);
  auto write_hyps = [&](const std::vector<Sentence>& hyps, const std::string& name) {
    std::vector<std::string> lines;
    for (const auto& h : hyps) lines.push_back(decode(h, vocab));
    write_lines(dir / name, lines);
  };
  if (!artifacts.decoded.empty()) write_hyps(artifacts.decoded.front(), "baseline.hyp");
  for (std::size_t i = 0; i < report.rows.size() && i + 1 < artifacts.decoded.size(); ++i)
    write_hyps(artifacts.decoded[i + 1], std::string(to_string(report.rows[i].mode)) + "." +
                                             std::string(to_string(report.rows[i].batching)) + ".hyp");
  save_checkpoint(artifacts.baseline, dir / "baseline.ckpt");
  std::ofstream(dir / "report.json", std::ios::binary) << report.to_json() << '\n';
}

}  // namespace docmrt
