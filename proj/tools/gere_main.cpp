// gere: command-line front end.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 data error,
// 3 internal error. Log verbosity comes from GERE_LOG_LEVEL
// (trace, debug, info, warn, error, off; default info).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gere/checkpoint.hpp"
#include "gere/corpus.hpp"
#include "gere/evalkit.hpp"
#include "gere/pipeline.hpp"
#include "gere/predictions.hpp"
#include "gere/run_config.hpp"
#include "gere/synthetic.hpp"
#include "gere/title_trie.hpp"
#include "gere/tokenizer.hpp"

namespace fs = std::filesystem;
using namespace gere;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("gere");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%l] %v");
  const char* level = std::getenv("GERE_LOG_LEVEL");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

// --config file, then --set key=value overrides in order.
RunConfig load_run_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  std::map<std::string, std::string> values;
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    values[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  config.apply(values);
  config.validate();
  return config;
}

void require_path(const fs::path& path, const char* key) {
  if (path.empty()) throw std::invalid_argument(std::string("config key '") + key + "' is required");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

nlohmann::json stats_json(const TrainStats& s) {
  return {{"step", s.step},           {"loss_title", s.loss_title},
          {"loss_evidence", s.loss_evidence}, {"loss_total", s.loss_total},
          {"grad_norm", s.grad_norm}, {"learning_rate", s.learning_rate},
          {"batch_size", s.batch_size}};
}

// ---------------------------------------------------------------------------

struct BuildTrieArgs {
  std::string wiki, claims, vocab_in, vocab_out, trie_out;
  std::size_t max_vocab = 50000;
};

int cmd_build_trie(const BuildTrieArgs& a) {
  Corpus corpus = load_wiki_pages(a.wiki);
  spdlog::info("loaded {} documents from {}", corpus.size(), a.wiki);
  Vocab vocab;
  if (!a.vocab_in.empty()) {
    vocab = Vocab::load(a.vocab_in);
  } else {
    std::vector<Claim> claims;
    if (!a.claims.empty()) claims = load_claims(a.claims);
    vocab = build_vocab(corpus, claims, a.max_vocab);
    vocab.save(a.vocab_out);
  }
  TitleTrie trie = TitleTrie::build(corpus, vocab);
  trie.save(fs::path(a.trie_out));
  std::cout << "vocab_size " << vocab.size() << "\n"
            << "nodes " << trie.node_count() << "\n"
            << "titles " << trie.title_count() << "\n"
            << "bytes " << fs::file_size(a.trie_out) << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string resume;
  std::optional<std::int64_t> stop_after;
};

int cmd_train(const TrainArgs& a) {
  RunConfig config = load_run_config(a.config, a.overrides);
  require_path(config.wiki, "wiki");
  require_path(config.claims, "claims");
  require_path(config.vocab, "vocab");
  require_path(config.output, "output");
  const fs::path out_dir = config.output;
  const fs::path final_path = config.checkpoint.empty() ? out_dir / "model.ckpt" : config.checkpoint;

  Vocab vocab = Vocab::load(config.vocab);
  resolve_model_config(config, vocab).validate();
  Corpus corpus = load_wiki_pages(config.wiki);
  std::vector<Claim> claims = load_claims(config.claims);
  if (!config.trie.empty()) TitleTrie::load(config.trie, &vocab);  // vocabulary consistency check

  std::optional<TrainingState> resume;
  if (!a.resume.empty()) {
    Checkpoint ckpt = load_checkpoint(fs::path(a.resume), vocab.checksum());
    if (!ckpt.optimizer) throw DataError("checkpoint " + a.resume + " has no optimizer state");
    resume = TrainingState{std::move(ckpt.model), std::move(*ckpt.optimizer)};
    spdlog::info("resuming from step {}", resume->optimizer.step);
  }

  fs::create_directories(out_dir);
  write_text(out_dir / "train_config.resolved", config.to_text());
  std::ofstream log(out_dir / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write training log in " + out_dir.string());

  const std::uint64_t checksum = vocab.checksum();
  auto on_step = [&](const TrainStats& s, const TrainingState& state) {
    if (s.step % config.log_every == 0 || s.step == config.total_updates) {
      log << stats_json(s).dump() << '\n';
      log.flush();
      spdlog::debug("step {} loss {:.4f} (title {:.4f}, evidence {:.4f}) lr {:.3g}", s.step, s.loss_total,
                    s.loss_title, s.loss_evidence, s.learning_rate);
    }
    if (s.step % 100 == 0) spdlog::info("step {}/{} loss {:.4f}", s.step, config.total_updates, s.loss_total);
    if (s.step % config.checkpoint_every == 0) {
      save_checkpoint(out_dir / ("step_" + std::to_string(s.step) + ".ckpt"), state.model, &state.optimizer,
                      checksum, s.step);
    }
  };
  TrainingState state = train_model(config, corpus, vocab, claims, std::move(resume), on_step, a.stop_after);
  save_checkpoint(final_path, state.model, &state.optimizer, checksum, state.optimizer.step);
  std::cout << "steps " << state.optimizer.step << "\n"
            << "parameters " << parameter_count(state.model.params) << "\n"
            << "checkpoint " << final_path.string() << "\n";
  return 0;
}

struct RetrieveArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string predictions_out;
};

int cmd_retrieve(const RetrieveArgs& a) {
  RunConfig config = load_run_config(a.config, a.overrides);
  require_path(config.wiki, "wiki");
  require_path(config.claims, "claims");
  require_path(config.vocab, "vocab");
  require_path(config.trie, "trie");
  require_path(config.checkpoint, "checkpoint");
  fs::path out = a.predictions_out;
  if (out.empty()) {
    require_path(config.output, "output");
    out = config.output / "predictions.jsonl";
  }

  Vocab vocab = Vocab::load(config.vocab);
  TitleTrie trie = TitleTrie::load(config.trie, &vocab);
  Checkpoint ckpt = load_checkpoint(config.checkpoint, vocab.checksum());
  Corpus corpus = load_wiki_pages(config.wiki);
  std::vector<Claim> claims = load_claims(config.claims);
  spdlog::info("retrieving {} claims with {} thread(s)", claims.size(), config.threads);

  auto results = retrieve_all(ckpt.model, vocab, trie, corpus, claims, make_retrieve_options(config), config.threads);
  for (const auto& r : results) {
    if (auto problem = check_result(r, corpus, config.max_evidence_steps)) {
      throw std::logic_error("claim " + std::to_string(r.claim_id) + ": " + *problem);
    }
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  {
    std::ofstream file(out, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot write " + out.string());
    write_predictions(results, file);
  }
  write_text(fs::path(out).replace_extension(".config.resolved"), config.to_text());

  auto stats = retrieval_stats(results);
  std::cout << "claims " << stats.n_claims << "\n"
            << "mean_titles " << stats.mean_titles << "\n"
            << "mean_evidence " << stats.mean_evidence << "\n"
            << "fraction_titles_le_5 " << stats.fraction_titles_within_5 << "\n"
            << "fraction_evidence_le_5 " << stats.fraction_evidence_within_5 << "\n"
            << "predictions " << out.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string predictions, gold, report;
  std::size_t max_evidence = 5;
  bool oracle_labels = false;
};

int cmd_eval(const EvalArgs& a) {
  auto predictions = load_predictions(a.predictions);
  auto golds = load_claims(a.gold);
  EvalSettings settings{a.max_evidence, a.oracle_labels};
  MetricsReport report = evaluate(predictions, golds, settings);
  for (auto id : report.missing_predictions) spdlog::warn("claim {} has no prediction; scored as empty", id);
  for (auto id : report.unknown_predictions) spdlog::warn("prediction for claim {} has no gold claim; ignored", id);
  std::string text = report.to_json().dump(2);
  std::cout << text << "\n";
  if (!a.report.empty()) write_text(a.report, text + "\n");
  return 0;
}

struct InspectArgs {
  std::string trie, vocab, prefix;
  std::size_t limit = 20;
};

int cmd_inspect_trie(const InspectArgs& a) {
  Vocab vocab = Vocab::load(a.vocab);
  TitleTrie trie = TitleTrie::load(fs::path(a.trie), &vocab);
  std::cout << "nodes " << trie.node_count() << "\ntitles " << trie.title_count() << "\n";
  auto prefix = vocab.encode(a.prefix);
  auto node = trie.walk(prefix);
  if (!node) {
    std::cout << "prefix '" << a.prefix << "' is not on the trie\n";
    return 0;
  }
  std::cout << "titles_below " << trie.node(*node).terminal_count << "\nnext";
  for (TokenId t : trie.allowed_next(prefix)) std::cout << ' ' << (t == kEot ? "<eot>" : vocab.token(t));
  std::cout << "\n";
  std::size_t shown = 0;
  const auto sequences = trie.title_sequences();
  for (std::size_t i = 0; i < sequences.size() && shown < a.limit; ++i) {
    if (sequences[i].size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), sequences[i].begin())) {
      std::cout << "  " << trie.doc_ids()[i] << "\n";
      ++shown;
    }
  }
  return 0;
}

struct SyntheticArgs {
  std::string out_dir;
  SyntheticOptions options;
};

int cmd_gen_synthetic(const SyntheticArgs& a) {
  SyntheticData data = generate_synthetic(a.options);
  fs::create_directories(a.out_dir);
  std::ofstream wiki(fs::path(a.out_dir) / "wiki.jsonl", std::ios::binary | std::ios::trunc);
  write_wiki_pages(data.corpus, wiki);
  std::ofstream claims(fs::path(a.out_dir) / "claims.jsonl", std::ios::binary | std::ios::trunc);
  write_claims(data.claims, claims);
  std::cout << "documents " << data.corpus.size() << "\nclaims " << data.claims.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Generative evidence retrieval: title trie, training, retrieval and evaluation"};
  app.require_subcommand(1);

  BuildTrieArgs build;
  auto* build_cmd = app.add_subcommand("build-trie", "Build the vocabulary and title trie from wiki pages");
  build_cmd->add_option("--wiki", build.wiki, "Wiki pages (.jsonl file or directory)")->required();
  build_cmd->add_option("--claims", build.claims, "Claims file whose text also feeds the vocabulary");
  build_cmd->add_option("--vocab", build.vocab_in, "Reuse an existing vocabulary instead of building one");
  build_cmd->add_option("--vocab-out", build.vocab_out, "Where to write the vocabulary");
  build_cmd->add_option("--trie-out", build.trie_out, "Where to write the trie")->required();
  build_cmd->add_option("--max-vocab", build.max_vocab, "Vocabulary size including specials");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the retrieval model");
  train_cmd->add_option("--config", train.config, "Run config file (key = value lines)");
  train_cmd->add_option("--set", train.overrides, "Override a config key: key=value");
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");
  train_cmd->add_option("--stop-after", train.stop_after, "Stop once this many updates are done");

  RetrieveArgs ret;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Generate titles and evidence for every claim");
  retrieve_cmd->add_option("--config", ret.config, "Run config file");
  retrieve_cmd->add_option("--set", ret.overrides, "Override a config key: key=value");
  retrieve_cmd->add_option("--out", ret.predictions_out, "Prediction file (default <output>/predictions.jsonl)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold claims");
  eval_cmd->add_option("--predictions", ev.predictions, "Prediction file")->required();
  eval_cmd->add_option("--gold", ev.gold, "Gold claims file")->required();
  eval_cmd->add_option("--max-evidence", ev.max_evidence, "Predicted sentences scored per claim");
  eval_cmd->add_flag("--oracle-labels", ev.oracle_labels, "Use gold labels for LA and FEVER");
  eval_cmd->add_option("--report", ev.report, "Also write the metrics report here");

  InspectArgs inspect;
  auto* inspect_cmd = app.add_subcommand("inspect-trie", "Query a trie with a title prefix");
  inspect_cmd->add_option("--trie", inspect.trie, "Trie file")->required();
  inspect_cmd->add_option("--vocab", inspect.vocab, "Vocabulary file")->required();
  inspect_cmd->add_option("--prefix", inspect.prefix, "Title prefix text");
  inspect_cmd->add_option("--limit", inspect.limit, "Titles to list");

  SyntheticArgs synth;
  auto* synth_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic wiki and claims dataset");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--docs", synth.options.n_docs, "Number of documents");
  synth_cmd->add_option("--claims", synth.options.n_claims, "Number of claims");
  synth_cmd->add_option("--nei-fraction", synth.options.nei_fraction, "Share of NOT ENOUGH INFO claims");
  synth_cmd->add_option("--seed", synth.options.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*build_cmd) {
      if (build.vocab_in.empty() && build.vocab_out.empty()) {
        throw std::invalid_argument("build-trie needs --vocab-out (or --vocab to reuse one)");
      }
      return cmd_build_trie(build);
    }
    if (*train_cmd) return cmd_train(train);
    if (*retrieve_cmd) return cmd_retrieve(ret);
    if (*eval_cmd) return cmd_eval(ev);
    if (*inspect_cmd) return cmd_inspect_trie(inspect);
    if (*synth_cmd) return cmd_gen_synthetic(synth);
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
  return kExitUsage;
}
