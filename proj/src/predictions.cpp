#include "gere/predictions.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

namespace gere {

using nlohmann::json;

void write_prediction(const RetrievalResult& result, std::ostream& out) {
  json evidence = json::array();
  for (const auto& e : result.evidence) evidence.push_back(json::array({e.doc_id, e.sentence_index}));
  json record = {{"claim_id", result.claim_id},
                 {"predicted_titles", result.titles},
                 {"predicted_evidence", std::move(evidence)},
                 {"scores", {{"title_log_prob", result.title_log_prob},
                             {"evidence", result.evidence_scores}}}};
  if (result.predicted_label) record["predicted_label"] = label_name(*result.predicted_label);
  out << record.dump() << '\n';
}

void write_predictions(const std::vector<RetrievalResult>& results, std::ostream& out) {
  for (const auto& r : results) write_prediction(r, out);
}

std::vector<RetrievalResult> read_predictions(std::istream& in, const std::string& source_name) {
  std::vector<RetrievalResult> results;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source_name + ":" + std::to_string(line_number) + ": ";
    try {
      json record = json::parse(line);
      RetrievalResult r;
      r.claim_id = record.at("claim_id").get<std::int64_t>();
      r.titles = record.value("predicted_titles", std::vector<std::string>{});
      for (const auto& pair : record.value("predicted_evidence", json::array())) {
        r.evidence.push_back({pair.at(0).get<std::string>(), pair.at(1).get<int>()});
      }
      if (auto scores = record.find("scores"); scores != record.end() && scores->is_object()) {
        r.title_log_prob = scores->value("title_log_prob", 0.0);
        r.evidence_scores = scores->value("evidence", std::vector<double>{});
      }
      if (auto label = record.find("predicted_label"); label != record.end() && !label->is_null()) {
        auto parsed = parse_label(label->get<std::string>());
        if (!parsed) throw DataError("unknown predicted_label '" + label->get<std::string>() + "'");
        r.predicted_label = parsed;
      }
      results.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(where + "malformed prediction: " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return results;
}

std::vector<RetrievalResult> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_predictions(in, path.string());
}

}  // namespace gere
