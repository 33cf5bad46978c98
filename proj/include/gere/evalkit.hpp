#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gere/corpus.hpp"
#include "gere/predictions.hpp"

namespace gere {

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;

  friend bool operator==(const PRF&, const PRF&) = default;
};

// f1 = 2PR / (P + R), or 0 when P + R = 0.
PRF make_prf(double precision, double recall);

struct VerificationScores {
  double label_accuracy = 0;
  double fever = 0;
  std::size_t n_claims = 0;

  friend bool operator==(const VerificationScores&, const VerificationScores&) = default;
};

// Document-level P/R/F1, macro-averaged over verifiable claims; F1 is taken
// from the averaged P and R. Predicted titles are compared as doc_ids and
// deduplicated. A claim without a prediction counts as an empty prediction.
PRF doc_prf(const std::vector<RetrievalResult>& predictions, const std::vector<Claim>& golds);

// As doc_prf over (doc_id, sentence_index) pairs, after truncating each
// prediction to its first max_evidence pairs.
PRF sent_prf(const std::vector<RetrievalResult>& predictions, const std::vector<Claim>& golds,
             std::size_t max_evidence = 5);

// Label accuracy and FEVER score over every gold claim. Every prediction
// must carry a label (DataError otherwise); a missing prediction earns no
// credit. With oracle_labels the gold label is used in place of the
// predicted one, which isolates the evidence requirement.
VerificationScores fever_scores(const std::vector<RetrievalResult>& predictions,
                                const std::vector<Claim>& golds, std::size_t max_evidence = 5,
                                bool oracle_labels = false);

struct EvalSettings {
  std::size_t max_evidence = 5;
  bool oracle_labels = false;
};

struct MetricsReport {
  PRF doc;
  PRF sent;
  std::optional<VerificationScores> verification;  // absent without labels
  std::size_t n_claims = 0;
  std::size_t n_verifiable = 0;
  std::vector<std::int64_t> missing_predictions;  // gold claims without a prediction
  std::vector<std::int64_t> unknown_predictions;  // predictions for no gold claim
  EvalSettings settings;

  nlohmann::json to_json() const;
};

// Scores everything available. Verification metrics are computed when
// oracle_labels is set or when predictions carry labels; a mix of labelled
// and unlabelled predictions is a DataError. Duplicate prediction claim_ids
// are a DataError.
MetricsReport evaluate(const std::vector<RetrievalResult>& predictions, const std::vector<Claim>& golds,
                       const EvalSettings& settings = {});

}  // namespace gere
