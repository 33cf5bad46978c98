#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "gere/corpus.hpp"
#include "gere/tokenizer.hpp"

namespace gere {

// Teacher-forcing inputs for one verifiable claim.
struct TrainingExample {
  std::int64_t claim_id = 0;
  std::vector<TokenId> claim;
  // BOS t1 EOT SEP t2 EOT ... EOS
  std::vector<TokenId> title_target;
  // Every sentence of the gold documents, in gold document order then
  // sentence index order.
  std::vector<std::vector<TokenId>> candidate_tokens;
  std::vector<EvidenceId> candidate_ids;
  // Gold evidence sequence as indices into the candidates.
  std::vector<int> evidence_target;

  // Padded token footprint used for batching.
  std::size_t token_length() const {
    return std::max(claim.size(), title_target.size());
  }
};

// Claim token ids as fed to the encoder; an empty claim becomes [EOS].
std::vector<TokenId> claim_tokens(const Vocab& vocab, const std::string& text);

// BOS t1 EOT SEP t2 EOT ... EOS for the given title texts.
std::vector<TokenId> linearize_titles(const Vocab& vocab, const std::vector<std::string>& titles);

// Throws DataError for NOT ENOUGH INFO claims, unresolvable evidence, or a
// title target longer than max_positions + 1 tokens. Claim and sentence
// tokens are truncated to max_positions.
TrainingExample make_training_example(const Claim& claim, const Corpus& corpus, const Vocab& vocab,
                                      int max_positions);

// Builds examples for every verifiable claim; NOT ENOUGH INFO claims are
// skipped.
std::vector<TrainingExample> make_training_examples(const std::vector<Claim>& claims,
                                                    const Corpus& corpus, const Vocab& vocab,
                                                    int max_positions);

// Deterministic batching. Each epoch is a seeded permutation of the
// examples, packed greedily so that batch_size * longest_example stays
// within max_tokens. Batch k depends only on (examples, max_tokens, seed, k),
// which makes resumed runs see the same data as uninterrupted ones.
class BatchPlan {
 public:
  BatchPlan(std::vector<std::size_t> lengths, std::size_t max_tokens, std::uint64_t seed);

  // Example indices of update `index` (0-based).
  const std::vector<std::size_t>& batch(std::int64_t index);

 private:
  void extend();

  std::vector<std::size_t> lengths_;
  std::size_t max_tokens_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::vector<std::size_t>> batches_;
};

}  // namespace gere
