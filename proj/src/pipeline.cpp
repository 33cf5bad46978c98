#include "gere/pipeline.hpp"

#include <set>
#include <thread>

#include "gere/training_data.hpp"

namespace gere {

ModelConfig resolve_model_config(const RunConfig& config, const Vocab& vocab) {
  ModelConfig model = config.model;
  model.vocab_size = static_cast<int>(vocab.size());
  model.seed = config.seed;
  return model;
}

LinearWarmupSchedule make_schedule(const RunConfig& config) {
  return {config.peak_learning_rate, config.total_updates, config.warmup_fraction};
}

TrainingState train_model(const RunConfig& config, const Corpus& corpus, const Vocab& vocab,
                          const std::vector<Claim>& claims, std::optional<TrainingState> resume,
                          const StepCallback& on_step, std::optional<std::int64_t> stop_after) {
  config.validate();
  const ModelConfig model_config = resolve_model_config(config, vocab);
  auto examples = make_training_examples(claims, corpus, vocab, model_config.max_positions);
  if (examples.empty()) throw DataError("no verifiable claims to train on");

  TrainingState state;
  if (resume) {
    if (!(resume->model.config == model_config)) {
      throw std::invalid_argument("resume checkpoint was trained with a different model config");
    }
    state = std::move(*resume);
  } else {
    state.model = make_model<float>(model_config);
    state.optimizer = make_adam_state(state.model);
  }

  std::vector<std::size_t> lengths;
  for (const auto& ex : examples) lengths.push_back(ex.token_length());
  BatchPlan plan(std::move(lengths), config.max_tokens, config.seed);
  const auto schedule = make_schedule(config);
  OptimizerConfig opt;
  opt.clip_norm = config.clip_norm;
  const std::int64_t last = std::min(config.total_updates, stop_after.value_or(config.total_updates));

  std::vector<const TrainingExample*> batch;
  while (state.optimizer.step < last) {
    batch.clear();
    for (std::size_t idx : plan.batch(state.optimizer.step)) batch.push_back(&examples[idx]);
    TrainStats stats = train_step(state.model, state.optimizer,
                                  std::span<const TrainingExample* const>(batch), schedule, opt, config.seed);
    if (on_step) on_step(stats, state);
  }
  return state;
}

RetrieveOptions make_retrieve_options(const RunConfig& config) {
  RetrieveOptions options;
  options.beam.beam_size = config.beam_size;
  options.beam.max_titles = config.max_titles;
  options.beam.length_normalize = config.length_normalize;
  options.max_evidence_steps = config.max_evidence_steps;
  return options;
}

std::vector<RetrievalResult> retrieve_all(const Model<float>& model, const Vocab& vocab,
                                          const TitleTrie& trie, const Corpus& corpus,
                                          const std::vector<Claim>& claims, const RetrieveOptions& options,
                                          int threads) {
  std::vector<RetrievalResult> results(claims.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), claims.size()));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      SentenceEmbeddingCache<float> cache;
      for (std::size_t i = w; i < claims.size(); i += workers) {
        results[i] = retrieve(model, vocab, trie, corpus, claims[i], options, &cache);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

RetrievalStats retrieval_stats(const std::vector<RetrievalResult>& results) {
  RetrievalStats stats;
  stats.n_claims = results.size();
  if (results.empty()) return stats;
  std::size_t titles = 0, evidence = 0, few_titles = 0, few_evidence = 0;
  for (const auto& r : results) {
    titles += r.titles.size();
    evidence += r.evidence.size();
    few_titles += r.titles.size() <= 5;
    few_evidence += r.evidence.size() <= 5;
  }
  const double n = static_cast<double>(results.size());
  stats.mean_titles = static_cast<double>(titles) / n;
  stats.mean_evidence = static_cast<double>(evidence) / n;
  stats.fraction_titles_within_5 = static_cast<double>(few_titles) / n;
  stats.fraction_evidence_within_5 = static_cast<double>(few_evidence) / n;
  return stats;
}

std::optional<std::string> check_result(const RetrievalResult& result, const Corpus& corpus,
                                        int max_evidence_steps) {
  std::set<std::string> titles;
  for (const auto& t : result.titles) {
    if (!corpus.find(t)) return "title '" + t + "' is not a corpus document";
    if (!titles.insert(t).second) return "title '" + t + "' repeated";
  }
  std::set<EvidenceId> seen;
  for (const auto& e : result.evidence) {
    std::string name = "(" + e.doc_id + ", " + std::to_string(e.sentence_index) + ")";
    if (!titles.count(e.doc_id)) return "evidence " + name + " outside the generated titles";
    if (!corpus.find_sentence(e)) return "evidence " + name + " does not exist";
    if (!seen.insert(e).second) return "evidence " + name + " repeated";
  }
  if (result.evidence.size() > static_cast<std::size_t>(max_evidence_steps)) {
    return "more than max_evidence_steps evidence sentences";
  }
  if (result.title_log_prob > 0) return "positive title log-probability";
  return std::nullopt;
}

}  // namespace gere
