#pragma once

// Exhaustive reference for title search: enumerate every legal title
// sequence (distinct titles, at most max_titles) and score each by teacher
// forcing.

#include <algorithm>
#include <vector>

#include "gere/decoding.hpp"

namespace gere::testing {

struct ScoredSequence {
  std::vector<TokenId> tokens;
  double log_prob = 0;
};

template <typename S>
double sequence_log_prob(const Model<S>& model, const ClaimEncoding<S>& enc, const std::vector<TokenId>& tokens) {
  double total = 0;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    Vector<S> logp = log_softmax<S>(decode_step_title(model, enc, std::span(tokens).first(t)));
    total += static_cast<double>(logp(tokens[t]));
  }
  return total;
}

template <typename S>
ScoredSequence exhaustive_best(const Model<S>& model, const ClaimEncoding<S>& enc, const TitleTrie& trie,
                               int max_titles) {
  const auto titles = trie.title_sequences();
  std::vector<ScoredSequence> all;
  std::vector<std::size_t> chosen;
  auto emit = [&](auto&& self) -> void {
    if (!chosen.empty()) {
      std::vector<TokenId> tokens = {kBos};
      for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (k) tokens.push_back(kSep);
        tokens.insert(tokens.end(), titles[chosen[k]].begin(), titles[chosen[k]].end());
        tokens.push_back(kEot);
      }
      tokens.push_back(kEos);
      all.push_back({tokens, sequence_log_prob(model, enc, tokens)});
    }
    if (static_cast<int>(chosen.size()) == max_titles) return;
    for (std::size_t i = 0; i < titles.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      chosen.push_back(i);
      self(self);
      chosen.pop_back();
    }
  };
  emit(emit);
  return *std::min_element(all.begin(), all.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
}

}  // namespace gere::testing
