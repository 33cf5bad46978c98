#include "gere/evalkit.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace gere {

namespace {

using PredictionIndex = std::map<std::int64_t, const RetrievalResult*>;

PredictionIndex index_predictions(const std::vector<RetrievalResult>& predictions) {
  PredictionIndex index;
  for (const auto& p : predictions) {
    if (!index.emplace(p.claim_id, &p).second) {
      throw DataError("duplicate prediction for claim " + std::to_string(p.claim_id));
    }
  }
  return index;
}

template <typename T>
std::pair<double, double> precision_recall(const std::set<T>& predicted, const std::set<T>& gold) {
  std::size_t hits = 0;
  for (const auto& p : predicted) hits += gold.count(p);
  double precision = predicted.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(predicted.size());
  double recall = gold.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(gold.size());
  return {precision, recall};
}

template <typename Extract>
PRF macro_prf(const std::vector<RetrievalResult>& predictions, const std::vector<Claim>& golds,
              Extract extract) {
  auto index = index_predictions(predictions);
  double p_sum = 0, r_sum = 0;
  std::size_t n = 0;
  for (const auto& claim : golds) {
    if (!claim.verifiable()) continue;
    auto [predicted, gold] = extract(claim, index.count(claim.id) ? index.at(claim.id) : nullptr);
    if (gold.empty()) continue;
    auto [p, r] = precision_recall(predicted, gold);
    p_sum += p;
    r_sum += r;
    ++n;
  }
  if (n == 0) return {};
  return make_prf(p_sum / static_cast<double>(n), r_sum / static_cast<double>(n));
}

std::vector<EvidenceId> truncated(const std::vector<EvidenceId>& evidence, std::size_t max_evidence) {
  return {evidence.begin(), evidence.begin() + static_cast<std::ptrdiff_t>(std::min(evidence.size(), max_evidence))};
}

}  // namespace

PRF make_prf(double precision, double recall) {
  double sum = precision + recall;
  return {precision, recall, sum > 0 ? 2 * precision * recall / sum : 0.0};
}

PRF doc_prf(const std::vector<RetrievalResult>& predictions, const std::vector<Claim>& golds) {
  return macro_prf(predictions, golds, [](const Claim& claim, const RetrievalResult* pred) {
    std::set<std::string> predicted, gold;
    if (pred) predicted.insert(pred->titles.begin(), pred->titles.end());
    for (const auto& group : claim.evidence_groups) {
      for (const auto& e : group) gold.insert(e.doc_id);
    }
    return std::pair{predicted, gold};
  });
}

PRF sent_prf(const std::vector<RetrievalResult>& predictions, const std::vector<Claim>& golds,
             std::size_t max_evidence) {
  return macro_prf(predictions, golds, [&](const Claim& claim, const RetrievalResult* pred) {
    std::set<EvidenceId> predicted, gold;
    if (pred) {
      for (auto& e : truncated(pred->evidence, max_evidence)) predicted.insert(std::move(e));
    }
    for (const auto& group : claim.evidence_groups) gold.insert(group.begin(), group.end());
    return std::pair{predicted, gold};
  });
}

VerificationScores fever_scores(const std::vector<RetrievalResult>& predictions,
                                const std::vector<Claim>& golds, std::size_t max_evidence,
                                bool oracle_labels) {
  auto index = index_predictions(predictions);
  VerificationScores scores;
  std::size_t correct = 0, strict = 0;
  for (const auto& claim : golds) {
    ++scores.n_claims;
    auto it = index.find(claim.id);
    if (it == index.end()) continue;
    const RetrievalResult& pred = *it->second;
    Label label;
    if (oracle_labels) {
      label = claim.label;
    } else if (pred.predicted_label) {
      label = *pred.predicted_label;
    } else {
      throw DataError("prediction for claim " + std::to_string(claim.id) + " has no predicted_label");
    }
    if (label != claim.label) continue;
    ++correct;
    if (!claim.verifiable()) {
      ++strict;
      continue;
    }
    auto evidence = truncated(pred.evidence, max_evidence);
    std::set<EvidenceId> predicted(evidence.begin(), evidence.end());
    bool covered = std::any_of(claim.evidence_groups.begin(), claim.evidence_groups.end(), [&](const auto& group) {
      return std::all_of(group.begin(), group.end(), [&](const EvidenceId& e) { return predicted.count(e) > 0; });
    });
    if (covered) ++strict;
  }
  if (scores.n_claims > 0) {
    scores.label_accuracy = static_cast<double>(correct) / static_cast<double>(scores.n_claims);
    scores.fever = static_cast<double>(strict) / static_cast<double>(scores.n_claims);
  }
  return scores;
}

MetricsReport evaluate(const std::vector<RetrievalResult>& predictions, const std::vector<Claim>& golds,
                       const EvalSettings& settings) {
  MetricsReport report;
  report.settings = settings;
  auto index = index_predictions(predictions);
  std::set<std::int64_t> gold_ids;
  for (const auto& claim : golds) {
    gold_ids.insert(claim.id);
    ++report.n_claims;
    if (claim.verifiable()) ++report.n_verifiable;
    if (!index.count(claim.id)) report.missing_predictions.push_back(claim.id);
  }
  for (const auto& [id, pred] : index) {
    if (!gold_ids.count(id)) report.unknown_predictions.push_back(id);
  }
  report.doc = doc_prf(predictions, golds);
  report.sent = sent_prf(predictions, golds, settings.max_evidence);

  std::size_t labelled = 0;
  for (const auto& p : predictions) labelled += p.predicted_label.has_value();
  if (settings.oracle_labels) {
    report.verification = fever_scores(predictions, golds, settings.max_evidence, true);
  } else if (labelled > 0) {
    if (labelled != predictions.size()) {
      throw DataError(std::to_string(predictions.size() - labelled) + " of " +
                      std::to_string(predictions.size()) + " predictions have no predicted_label");
    }
    report.verification = fever_scores(predictions, golds, settings.max_evidence, false);
  }
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  auto prf = [](const PRF& m) {
    return nlohmann::json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  };
  nlohmann::json out;
  out["doc"] = prf(doc);
  out["sent"] = prf(sent);
  if (verification) {
    out["la"] = verification->label_accuracy;
    out["fever"] = verification->fever;
  } else {
    out["la"] = nullptr;
    out["fever"] = nullptr;
  }
  out["n"] = {{"claims", n_claims},
              {"verifiable", n_verifiable},
              {"missing_predictions", missing_predictions.size()},
              {"unknown_predictions", unknown_predictions.size()}};
  out["settings"] = {{"max_evidence", settings.max_evidence},
                     {"averaging", "macro over verifiable claims; f1 from averaged precision and recall"},
                     {"label_source", settings.oracle_labels ? "gold (oracle)" : "predicted_label"}};
  return out;
}

}  // namespace gere
