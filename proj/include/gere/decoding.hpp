#pragma once

// Inference: trie-constrained beam search over title sequences, greedy
// decoding over the dynamic evidence vocabulary, and the retrieve pipeline
// composing them.

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gere/corpus.hpp"
#include "gere/model.hpp"
#include "gere/predictions.hpp"
#include "gere/title_trie.hpp"
#include "gere/training_data.hpp"

namespace gere {

struct BeamOptions {
  int beam_size = 5;
  int max_titles = 10;
  // Rank finished hypotheses by log_prob / length. Off by default: plain
  // summed log-probability keeps beam search comparable with exhaustive
  // enumeration.
  bool length_normalize = false;
};

struct BeamHypothesis {
  std::vector<TokenId> tokens;  // starts with BOS
  double log_prob = 0.0;
  bool finished = false;  // last token is EOS
  int titles_emitted = 0;
};

struct TitleSearchResult {
  BeamHypothesis best;
  std::vector<std::string> doc_ids;  // generation order
};

// Raised when no hypothesis reaches EOS; carries the beams alive at the end.
class SearchError : public std::runtime_error {
 public:
  SearchError(const std::string& what, std::vector<BeamHypothesis> beams)
      : std::runtime_error(what), beams_(std::move(beams)) {}
  const std::vector<BeamHypothesis>& beams() const { return beams_; }

 private:
  std::vector<BeamHypothesis> beams_;
};

namespace detail {

// Constraint state of one hypothesis: where it is in the trie and which
// titles it has already completed.
struct TitleCursor {
  bool in_title = true;
  TitleTrie::NodeIndex node = TitleTrie::kRoot;
  std::vector<TitleTrie::NodeIndex> used;  // terminal nodes, generation order
};

inline bool subtree_available(const TitleTrie& trie, TitleTrie::NodeIndex node,
                              const std::vector<TitleTrie::NodeIndex>& used) {
  const auto& n = trie.node(node);
  std::uint32_t used_below = 0;
  for (auto u : used) {
    if (u >= node && u < node + n.subtree_size) ++used_below;
  }
  return n.terminal_count > used_below;
}

// Tokens permitted after the hypothesis described by `cursor`. Inside a
// title: trie continuations whose subtree still holds an unused title (so
// completed titles cannot be regenerated). After EOT: EOS, plus SEP while
// more titles are allowed and available.
inline std::vector<TokenId> allowed_tokens(const TitleTrie& trie, const TitleCursor& cursor,
                                           int titles_emitted, int max_titles) {
  std::vector<TokenId> tokens;
  if (cursor.in_title) {
    for (const auto& [token, child] : trie.node(cursor.node).children) {
      if (subtree_available(trie, child, cursor.used)) tokens.push_back(token);
    }
  } else {
    tokens.push_back(kEos);
    if (titles_emitted < max_titles && cursor.used.size() < trie.title_count()) {
      tokens.push_back(kSep);
    }
    std::sort(tokens.begin(), tokens.end());
  }
  return tokens;
}

inline TitleCursor advance(const TitleTrie& trie, TitleCursor cursor, TokenId token) {
  if (cursor.in_title) {
    auto next = trie.child(cursor.node, token);
    if (!next) throw std::logic_error("advance: token not allowed by the trie");
    cursor.node = *next;
    if (token == kEot) {
      cursor.used.push_back(cursor.node);
      cursor.in_title = false;
    }
  } else if (token == kSep) {
    cursor.in_title = true;
    cursor.node = TitleTrie::kRoot;
  }
  return cursor;
}

template <typename S>
struct LiveBeam {
  BeamHypothesis hyp;
  TitleCursor cursor;
  TitleDecoderState<S> state;
  Vector<S> next_log_probs;
};

inline double rank_score(const BeamHypothesis& h, bool length_normalize) {
  return length_normalize ? h.log_prob / static_cast<double>(h.tokens.size() - 1) : h.log_prob;
}

// Higher score first; equal scores fall back to lexicographic token order.
inline bool better(double score_a, const std::vector<TokenId>& a, TokenId next_a, double score_b,
                   const std::vector<TokenId>& b, TokenId next_b) {
  if (score_a != score_b) return score_a > score_b;
  auto cmp = std::lexicographical_compare_three_way(a.begin(), a.end(), b.begin(), b.end());
  if (cmp != 0) return cmp < 0;
  return next_a < next_b;
}

}  // namespace detail

// Beam search over BOS t1 EOT SEP t2 EOT ... EOS where every title is forced
// onto the trie and no title repeats. Returns the best finished hypothesis
// by summed token log-probability.
template <typename S>
TitleSearchResult beam_search_titles(const Model<S>& model, const ClaimEncoding<S>& enc,
                                     const TitleTrie& trie, const BeamOptions& options = {}) {
  if (trie.title_count() == 0) throw std::invalid_argument("beam_search_titles: empty trie");
  if (options.beam_size < 1 || options.max_titles < 1) {
    throw std::invalid_argument("beam_search_titles: beam_size and max_titles must be positive");
  }
  const auto memory = precompute_cross_memory(model, enc);
  const int max_positions = model.config.max_positions;

  std::vector<detail::LiveBeam<S>> alive(1);
  alive[0].hyp.tokens = {kBos};
  alive[0].state = start_title_state(model);
  alive[0].next_log_probs = log_softmax<S>(title_decoder_step(model, memory, alive[0].state, kBos));

  std::vector<BeamHypothesis> finished;
  auto best_finished = [&]() -> const BeamHypothesis* {
    const BeamHypothesis* best = nullptr;
    for (const auto& h : finished) {
      if (!best || detail::better(detail::rank_score(h, options.length_normalize), h.tokens, 0,
                                  detail::rank_score(*best, options.length_normalize), best->tokens, 0)) {
        best = &h;
      }
    }
    return best;
  };

  struct Candidate {
    std::size_t parent;
    TokenId token;
    double log_prob;
    double rank;
  };

  while (!alive.empty()) {
    std::vector<Candidate> candidates;
    for (std::size_t b = 0; b < alive.size(); ++b) {
      const auto& beam = alive[b];
      for (TokenId t : detail::allowed_tokens(trie, beam.cursor, beam.hyp.titles_emitted, options.max_titles)) {
        double lp = beam.hyp.log_prob + static_cast<double>(beam.next_log_probs(t));
        double rank = options.length_normalize ? lp / static_cast<double>(beam.hyp.tokens.size()) : lp;
        candidates.push_back({b, t, lp, rank});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& x, const Candidate& y) {
      return detail::better(x.rank, alive[x.parent].hyp.tokens, x.token, y.rank,
                            alive[y.parent].hyp.tokens, y.token);
    });
    if (candidates.size() > static_cast<std::size_t>(options.beam_size)) {
      candidates.resize(static_cast<std::size_t>(options.beam_size));
    }

    std::vector<detail::LiveBeam<S>> next;
    for (const auto& c : candidates) {
      const auto& parent = alive[c.parent];
      BeamHypothesis hyp = parent.hyp;
      hyp.tokens.push_back(c.token);
      hyp.log_prob = c.log_prob;
      if (c.token == kEos) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
        continue;
      }
      // The next token would need a position past the model's range.
      if (static_cast<int>(hyp.tokens.size()) >= max_positions) continue;
      detail::LiveBeam<S> beam;
      beam.cursor = detail::advance(trie, parent.cursor, c.token);
      if (c.token == kEot) ++hyp.titles_emitted;
      beam.hyp = std::move(hyp);
      beam.state = parent.state;
      beam.next_log_probs = log_softmax<S>(title_decoder_step(model, memory, beam.state, c.token));
      next.push_back(std::move(beam));
    }
    alive = std::move(next);

    // Extensions only lower the summed log-probability, so once every live
    // hypothesis is strictly below the best finished one the answer is fixed.
    if (!options.length_normalize) {
      if (const auto* best = best_finished()) {
        bool can_improve = std::any_of(alive.begin(), alive.end(), [&](const auto& b) {
          return b.hyp.log_prob >= best->log_prob;
        });
        if (!can_improve) break;
      }
    }
  }

  const BeamHypothesis* best = best_finished();
  if (!best) {
    std::vector<BeamHypothesis> partial;
    for (auto& b : alive) partial.push_back(b.hyp);
    throw SearchError("beam search finished no hypothesis", std::move(partial));
  }

  TitleSearchResult result;
  result.best = *best;
  // Replay the winning tokens to recover the completed titles.
  detail::TitleCursor cursor;
  for (std::size_t i = 1; i + 1 < best->tokens.size(); ++i) {
    cursor = detail::advance(trie, cursor, best->tokens[i]);
  }
  for (auto terminal : cursor.used) {
    result.doc_ids.push_back(trie.doc_ids()[trie.node(terminal).terminal]);
  }
  return result;
}

struct EvidenceSearchResult {
  std::vector<EvidenceId> evidence;
  std::vector<double> step_log_probs;
  bool stopped_on_eoe = false;
};

// Greedy decoding over [candidates..., EOE]. A chosen candidate is not
// offered again; ties go to the smaller (doc_id, sentence_index), and EOE
// only wins ties against nothing.
template <typename S>
EvidenceSearchResult greedy_evidence(const Model<S>& model, const ClaimEncoding<S>& enc,
                                     std::span<const SentenceEmbedding<S>> candidates,
                                     int max_evidence_steps = 10) {
  if (candidates.empty()) throw std::invalid_argument("greedy_evidence: empty candidate set");
  const int step_limit = std::min(max_evidence_steps, model.config.max_positions - 1);
  std::vector<bool> taken(candidates.size(), false);
  std::vector<SentenceEmbedding<S>> previous;
  EvidenceSearchResult result;
  const std::size_t eoe = candidates.size();
  for (int step = 0; step < step_limit; ++step) {
    Vector<S> logp = log_softmax<S>(decode_step_evidence<S>(model, enc, previous, candidates));
    std::size_t best = eoe;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i]) continue;
      if (logp(i) > logp(best) ||
          (logp(i) == logp(best) && (best == eoe || candidates[i].source < candidates[best].source))) {
        best = i;
      }
    }
    result.step_log_probs.push_back(static_cast<double>(logp(best)));
    if (best == eoe) {
      result.stopped_on_eoe = true;
      break;
    }
    taken[best] = true;
    previous.push_back(candidates[best]);
    result.evidence.push_back(candidates[best].source);
  }
  return result;
}

// Per-document sentence embeddings, reused across claims of one run.
template <typename S>
class SentenceEmbeddingCache {
 public:
  const std::vector<SentenceEmbedding<S>>& get(const Model<S>& model, const Vocab& vocab,
                                               const Document& doc) {
    auto it = cache_.find(doc.doc_id);
    if (it != cache_.end()) return it->second;
    std::vector<SentenceEmbedding<S>> embeddings;
    for (const auto& s : doc.sentences) {
      auto tokens = vocab.encode(s.text);
      embeddings.push_back(encode_sentence(model, tokens, EvidenceId{doc.doc_id, s.index}));
    }
    return cache_.emplace(doc.doc_id, std::move(embeddings)).first->second;
  }

 private:
  std::map<std::string, std::vector<SentenceEmbedding<S>>, std::less<>> cache_;
};

// Embeds every sentence of the given documents, in title order.
template <typename S>
std::vector<SentenceEmbedding<S>> collect_candidates(const Model<S>& model, const Vocab& vocab,
                                                     const Corpus& corpus,
                                                     const std::vector<std::string>& doc_ids,
                                                     SentenceEmbeddingCache<S>* cache = nullptr) {
  std::vector<SentenceEmbedding<S>> candidates;
  SentenceEmbeddingCache<S> local;
  SentenceEmbeddingCache<S>& c = cache ? *cache : local;
  for (const auto& id : doc_ids) {
    const Document* doc = corpus.find(id);
    if (!doc) throw DataError("generated title '" + id + "' is not in the corpus");
    const auto& embeddings = c.get(model, vocab, *doc);
    candidates.insert(candidates.end(), embeddings.begin(), embeddings.end());
  }
  return candidates;
}

struct RetrieveOptions {
  BeamOptions beam;
  int max_evidence_steps = 10;
};

// encode_claim -> beam_search_titles -> candidate collection ->
// greedy_evidence. Retrieved documents without any sentences yield an empty
// evidence list rather than an error.
template <typename S>
RetrievalResult retrieve(const Model<S>& model, const Vocab& vocab, const TitleTrie& trie,
                         const Corpus& corpus, std::int64_t claim_id, const std::string& claim_text,
                         const RetrieveOptions& options = {},
                         SentenceEmbeddingCache<S>* cache = nullptr) {
  auto tokens = claim_tokens(vocab, claim_text);
  ClaimEncoding<S> enc = encode_claim(model, tokens);
  TitleSearchResult titles = beam_search_titles(model, enc, trie, options.beam);

  RetrievalResult result;
  result.claim_id = claim_id;
  result.titles = titles.doc_ids;
  result.title_log_prob = titles.best.log_prob;
  auto candidates = collect_candidates(model, vocab, corpus, titles.doc_ids, cache);
  if (!candidates.empty()) {
    auto evidence = greedy_evidence<S>(model, enc, candidates, options.max_evidence_steps);
    result.evidence = std::move(evidence.evidence);
    result.evidence_scores = std::move(evidence.step_log_probs);
  }
  return result;
}

template <typename S>
RetrievalResult retrieve(const Model<S>& model, const Vocab& vocab, const TitleTrie& trie,
                         const Corpus& corpus, const Claim& claim, const RetrieveOptions& options = {},
                         SentenceEmbeddingCache<S>* cache = nullptr) {
  return retrieve(model, vocab, trie, corpus, claim.id, claim.text, options, cache);
}

}  // namespace gere
