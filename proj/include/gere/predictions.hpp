#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gere/corpus.hpp"

namespace gere {

// Output of one retrieve call, and one record of a prediction file:
//   {"claim_id": 7, "predicted_titles": ["Doc_A", ...],
//    "predicted_evidence": [["Doc_A", 0], ...],
//    "scores": {"title_log_prob": -1.2, "evidence": [-0.1, ...]},
//    "predicted_label": "SUPPORTS"}            (label optional)
// predicted_titles holds doc_ids so files join exactly with FEVER gold.
struct RetrievalResult {
  std::int64_t claim_id = 0;
  std::vector<std::string> titles;
  std::vector<EvidenceId> evidence;
  double title_log_prob = 0.0;
  // Log-probability of each greedy step, including the final EOE step when
  // generation stopped on EOE.
  std::vector<double> evidence_scores;
  std::optional<Label> predicted_label;

  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

void write_prediction(const RetrievalResult& result, std::ostream& out);
void write_predictions(const std::vector<RetrievalResult>& results, std::ostream& out);
std::vector<RetrievalResult> read_predictions(std::istream& in, const std::string& source_name);
std::vector<RetrievalResult> load_predictions(const std::filesystem::path& path);

}  // namespace gere
