#pragma once

// Independent brute-force scorer: linear scans over plain vectors, no
// shared helpers with the evaluation library.

#include <cstdint>
#include <string>
#include <vector>

#include "gere/corpus.hpp"
#include "gere/predictions.hpp"

namespace gere::testing {

struct OracleScores {
  double doc_p = 0, doc_r = 0, sent_p = 0, sent_r = 0, la = 0, fever = 0;
};

template <typename T>
bool contains(const std::vector<T>& items, const T& x) {
  for (const auto& i : items) {
    if (i == x) return true;
  }
  return false;
}

template <typename T>
std::vector<T> distinct(const std::vector<T>& items) {
  std::vector<T> out;
  for (const auto& i : items) {
    if (!contains(out, i)) out.push_back(i);
  }
  return out;
}

inline const RetrievalResult* find_prediction(const std::vector<RetrievalResult>& preds, std::int64_t id) {
  for (const auto& p : preds) {
    if (p.claim_id == id) return &p;
  }
  return nullptr;
}

inline OracleScores oracle_scores(const std::vector<RetrievalResult>& preds, const std::vector<Claim>& golds,
                                  std::size_t max_evidence) {
  OracleScores s;
  int verifiable = 0;
  int correct = 0, strict = 0;
  for (const auto& claim : golds) {
    const RetrievalResult* pred = find_prediction(preds, claim.id);
    std::vector<EvidenceId> first_k;
    if (pred) {
      for (std::size_t i = 0; i < pred->evidence.size() && i < max_evidence; ++i) first_k.push_back(pred->evidence[i]);
    }
    bool label_ok = pred && pred->predicted_label && *pred->predicted_label == claim.label;
    if (label_ok) ++correct;

    if (claim.label != Label::kNotEnoughInfo) {
      std::vector<std::string> gold_docs;
      std::vector<EvidenceId> gold_sents;
      for (const auto& group : claim.evidence_groups) {
        for (const auto& e : group) {
          gold_docs.push_back(e.doc_id);
          gold_sents.push_back(e);
        }
      }
      gold_docs = distinct(gold_docs);
      gold_sents = distinct(gold_sents);
      if (!gold_sents.empty()) {
        ++verifiable;
        std::vector<std::string> pd = pred ? distinct(pred->titles) : std::vector<std::string>{};
        std::vector<EvidenceId> ps = distinct(first_k);
        int dh = 0, sh = 0;
        for (const auto& d : pd) dh += contains(gold_docs, d);
        for (const auto& e : ps) sh += contains(gold_sents, e);
        s.doc_p += pd.empty() ? 0.0 : double(dh) / double(pd.size());
        s.doc_r += double(dh) / double(gold_docs.size());
        s.sent_p += ps.empty() ? 0.0 : double(sh) / double(ps.size());
        s.sent_r += double(sh) / double(gold_sents.size());
      }
      bool covered = false;
      for (const auto& group : claim.evidence_groups) {
        bool all = true;
        for (const auto& e : group) all = all && contains(first_k, e);
        covered = covered || all;
      }
      if (label_ok && covered) ++strict;
    } else if (label_ok) {
      ++strict;
    }
  }
  if (verifiable > 0) {
    s.doc_p /= verifiable;
    s.doc_r /= verifiable;
    s.sent_p /= verifiable;
    s.sent_r /= verifiable;
  }
  if (!golds.empty()) {
    s.la = double(correct) / double(golds.size());
    s.fever = double(strict) / double(golds.size());
  }
  return s;
}

}  // namespace gere::testing
