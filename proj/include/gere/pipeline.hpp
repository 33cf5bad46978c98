#pragma once

// Run-level orchestration shared by the command-line tool and the tests:
// the training loop with logging, checkpointing and resume, and batch
// retrieval with summary statistics.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gere/checkpoint.hpp"
#include "gere/corpus.hpp"
#include "gere/decoding.hpp"
#include "gere/run_config.hpp"
#include "gere/title_trie.hpp"
#include "gere/tokenizer.hpp"
#include "gere/trainer.hpp"

namespace gere {

// Model config with vocab_size taken from the vocabulary and the seed from
// the run.
ModelConfig resolve_model_config(const RunConfig& config, const Vocab& vocab);

LinearWarmupSchedule make_schedule(const RunConfig& config);

struct TrainingState {
  Model<float> model;
  AdamState<float> optimizer;
};

// Called after every update with the state the update produced.
using StepCallback = std::function<void(const TrainStats&, const TrainingState&)>;

// Trains up to config.total_updates (or stop_after, when given). A resumed
// run continues from the checkpoint's step and sees exactly the batches and
// dropout masks an uninterrupted run would have.
TrainingState train_model(const RunConfig& config, const Corpus& corpus, const Vocab& vocab,
                          const std::vector<Claim>& claims, std::optional<TrainingState> resume = {},
                          const StepCallback& on_step = {}, std::optional<std::int64_t> stop_after = {});

struct RetrievalStats {
  std::size_t n_claims = 0;
  double mean_titles = 0;
  double mean_evidence = 0;
  double fraction_titles_within_5 = 0;
  double fraction_evidence_within_5 = 0;
};

RetrieveOptions make_retrieve_options(const RunConfig& config);

// Retrieves every claim, fanning out over `threads` workers. Results follow
// the order of `claims` regardless of the thread count.
std::vector<RetrievalResult> retrieve_all(const Model<float>& model, const Vocab& vocab,
                                          const TitleTrie& trie, const Corpus& corpus,
                                          const std::vector<Claim>& claims, const RetrieveOptions& options,
                                          int threads = 1);

RetrievalStats retrieval_stats(const std::vector<RetrievalResult>& results);

// Checks the RetrievalResult contract: titles are distinct corpus doc_ids,
// evidence pairs are distinct, exist, lie within the titles, and number at
// most max_evidence_steps. Returns a description of the first violation.
std::optional<std::string> check_result(const RetrievalResult& result, const Corpus& corpus,
                                        int max_evidence_steps);

}  // namespace gere
