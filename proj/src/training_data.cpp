#include "gere/training_data.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace gere {

std::vector<TokenId> claim_tokens(const Vocab& vocab, const std::string& text) {
  std::vector<TokenId> ids = vocab.encode(text);
  if (ids.empty()) ids.push_back(kEos);
  return ids;
}

std::vector<TokenId> linearize_titles(const Vocab& vocab, const std::vector<std::string>& titles) {
  std::vector<TokenId> ids{kBos};
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (i) ids.push_back(kSep);
    auto title = vocab.encode(titles[i]);
    ids.insert(ids.end(), title.begin(), title.end());
    ids.push_back(kEot);
  }
  ids.push_back(kEos);
  return ids;
}

TrainingExample make_training_example(const Claim& claim, const Corpus& corpus, const Vocab& vocab,
                                      int max_positions) {
  GoldTargets gold = gold_targets(claim, &corpus);
  if (gold.evidence.empty()) {
    throw DataError("claim " + std::to_string(claim.id) + " has no gold evidence");
  }
  const auto limit = static_cast<std::size_t>(max_positions);

  TrainingExample ex;
  ex.claim_id = claim.id;
  ex.claim = claim_tokens(vocab, claim.text);
  if (ex.claim.size() > limit) ex.claim.resize(limit);
  ex.title_target = linearize_titles(vocab, gold.titles);
  if (ex.title_target.size() > limit + 1) {
    throw DataError("claim " + std::to_string(claim.id) + ": title target of " +
                    std::to_string(ex.title_target.size()) + " tokens exceeds max_positions");
  }
  if (gold.evidence.size() + 1 > limit) {
    throw DataError("claim " + std::to_string(claim.id) + ": too many gold evidence sentences");
  }

  for (const auto& doc_id : gold.doc_ids) {
    const Document* doc = corpus.find(doc_id);
    for (const auto& sentence : doc->sentences) {
      auto tokens = vocab.encode(sentence.text);
      if (tokens.size() > limit) tokens.resize(limit);
      ex.candidate_tokens.push_back(std::move(tokens));
      ex.candidate_ids.push_back({doc_id, sentence.index});
    }
  }
  for (const auto& id : gold.evidence) {
    auto it = std::find(ex.candidate_ids.begin(), ex.candidate_ids.end(), id);
    ex.evidence_target.push_back(static_cast<int>(it - ex.candidate_ids.begin()));
  }
  return ex;
}

std::vector<TrainingExample> make_training_examples(const std::vector<Claim>& claims,
                                                    const Corpus& corpus, const Vocab& vocab,
                                                    int max_positions) {
  std::vector<TrainingExample> examples;
  for (const auto& claim : claims) {
    if (!claim.verifiable()) continue;
    examples.push_back(make_training_example(claim, corpus, vocab, max_positions));
  }
  return examples;
}

BatchPlan::BatchPlan(std::vector<std::size_t> lengths, std::size_t max_tokens, std::uint64_t seed)
    : lengths_(std::move(lengths)), max_tokens_(max_tokens), seed_(seed) {
  if (lengths_.empty()) throw std::invalid_argument("BatchPlan: no examples");
  if (max_tokens_ == 0) throw std::invalid_argument("BatchPlan: max_tokens must be positive");
}

const std::vector<std::size_t>& BatchPlan::batch(std::int64_t index) {
  if (index < 0) throw std::out_of_range("BatchPlan: negative batch index");
  while (batches_.size() <= static_cast<std::size_t>(index)) extend();
  return batches_[static_cast<std::size_t>(index)];
}

void BatchPlan::extend() {
  std::vector<std::size_t> order(lengths_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed_ * 0x9E3779B97F4A7C15ull + epoch_++);
  // Fisher-Yates with our own index draws; std::shuffle's use of the engine
  // is implementation-defined.
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::size_t> current;
  std::size_t longest = 0;
  for (std::size_t idx : order) {
    std::size_t len = std::max<std::size_t>(lengths_[idx], 1);
    std::size_t longest_if_added = std::max(longest, len);
    if (!current.empty() && (current.size() + 1) * longest_if_added > max_tokens_) {
      batches_.push_back(std::move(current));
      current.clear();
      longest = 0;
      longest_if_added = len;
    }
    current.push_back(idx);
    longest = longest_if_added;
  }
  if (!current.empty()) batches_.push_back(std::move(current));
}

}  // namespace gere
