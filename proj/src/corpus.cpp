#include "gere/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gere {
namespace {

using nlohmann::json;

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::vector<std::filesystem::path> input_files(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw DataError("no such file or directory: " + path.string());
  if (!fs::is_directory(path)) return {path};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

const Sentence* Document::find_sentence(int index) const {
  auto it = std::lower_bound(sentences.begin(), sentences.end(), index,
                             [](const Sentence& s, int i) { return s.index < i; });
  if (it == sentences.end() || it->index != index) return nullptr;
  return &*it;
}

void Corpus::add(Document document) {
  if (document.title.empty()) {
    throw DataError("document '" + document.doc_id + "' has an empty title");
  }
  for (std::size_t i = 1; i < document.sentences.size(); ++i) {
    if (document.sentences[i].index <= document.sentences[i - 1].index) {
      throw DataError("document '" + document.doc_id +
                      "' has non-increasing sentence indices");
    }
  }
  if (documents_.count(document.doc_id)) {
    throw DataError("duplicate doc_id '" + document.doc_id + "'");
  }
  if (auto it = title_index_.find(document.title); it != title_index_.end()) {
    throw DataError("duplicate title '" + document.title + "' for doc_ids '" +
                    it->second + "' and '" + document.doc_id + "'");
  }
  title_index_.emplace(document.title, document.doc_id);
  std::string key = document.doc_id;
  documents_.emplace(std::move(key), std::move(document));
}

void Corpus::merge(Corpus&& other) {
  for (auto& [id, doc] : other.documents_) add(std::move(doc));
  other.documents_.clear();
  other.title_index_.clear();
}

const Document* Corpus::find(std::string_view doc_id) const {
  auto it = documents_.find(doc_id);
  return it == documents_.end() ? nullptr : &it->second;
}

const Document* Corpus::find_by_title(std::string_view title) const {
  auto it = title_index_.find(title);
  return it == title_index_.end() ? nullptr : find(it->second);
}

const Sentence* Corpus::find_sentence(const EvidenceId& id) const {
  const Document* doc = find(id.doc_id);
  return doc ? doc->find_sentence(id.sentence_index) : nullptr;
}

std::string decode_title(std::string_view doc_id) {
  std::string title(doc_id);
  std::replace(title.begin(), title.end(), '_', ' ');
  replace_all(title, "-LRB-", "(");
  replace_all(title, "-RRB-", ")");
  replace_all(title, "-COLON-", ":");
  return title;
}

std::vector<Sentence> parse_page_lines(std::string_view lines) {
  std::vector<Sentence> sentences;
  std::size_t start = 0;
  while (start <= lines.size()) {
    std::size_t end = lines.find('\n', start);
    if (end == std::string_view::npos) end = lines.size();
    std::string_view entry = lines.substr(start, end - start);
    start = end + 1;
    if (entry.empty()) continue;

    std::size_t tab = entry.find('\t');
    std::string_view index_text = entry.substr(0, tab);
    int index = 0;
    auto [ptr, ec] = std::from_chars(index_text.data(),
                                     index_text.data() + index_text.size(), index);
    if (ec != std::errc() || ptr != index_text.data() + index_text.size() || index < 0) {
      throw DataError("bad sentence index '" + std::string(index_text) + "'");
    }
    std::string text;
    if (tab != std::string_view::npos) {
      std::string_view rest = entry.substr(tab + 1);
      text = std::string(rest.substr(0, rest.find('\t')));
    }
    if (!sentences.empty() && index <= sentences.back().index) {
      throw DataError("sentence index " + std::to_string(index) +
                      " does not increase");
    }
    sentences.push_back({index, std::move(text)});
  }
  return sentences;
}

Corpus read_wiki_pages(std::istream& in, const std::string& source_name) {
  Corpus corpus;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (blank(line)) continue;
    try {
      json record = json::parse(line);
      std::string id = record.at("id").get<std::string>();
      std::string lines = record.value("lines", std::string());
      // The FEVER dump opens with an empty placeholder record.
      if (id.empty()) continue;
      Document doc{id, decode_title(id), parse_page_lines(lines)};
      corpus.add(std::move(doc));
    } catch (const json::exception& e) {
      throw DataError(where(source_name, line_number) + ": malformed record: " + e.what());
    } catch (const DataError& e) {
      throw DataError(where(source_name, line_number) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_wiki_pages(const std::filesystem::path& path) {
  Corpus corpus;
  for (const auto& file : input_files(path)) {
    auto in = open_input(file);
    corpus.merge(read_wiki_pages(in, file.string()));
  }
  return corpus;
}

void write_wiki_pages(const Corpus& corpus, std::ostream& out) {
  for (const auto& [id, doc] : corpus.documents()) {
    std::string lines;
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      if (i) lines += '\n';
      lines += std::to_string(doc.sentences[i].index);
      lines += '\t';
      lines += doc.sentences[i].text;
    }
    std::string text;
    for (const auto& s : doc.sentences) {
      if (!text.empty() && !s.text.empty()) text += ' ';
      text += s.text;
    }
    json record = {{"id", doc.doc_id}, {"text", text}, {"lines", lines}};
    out << record.dump() << '\n';
  }
}

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kSupports: return "SUPPORTS";
    case Label::kRefutes: return "REFUTES";
    case Label::kNotEnoughInfo: return "NOT ENOUGH INFO";
  }
  return "NOT ENOUGH INFO";
}

std::optional<Label> parse_label(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
    text.remove_prefix(1);
  }
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
    text.remove_suffix(1);
  }
  std::string norm;
  for (char c : text) {
    norm += c == '_' ? ' ' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  if (norm == "SUPPORTS") return Label::kSupports;
  if (norm == "REFUTES") return Label::kRefutes;
  if (norm == "NOT ENOUGH INFO" || norm == "NEI") return Label::kNotEnoughInfo;
  return std::nullopt;
}

std::vector<Claim> read_claims(std::istream& in, const std::string& source_name) {
  std::vector<Claim> claims;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (blank(line)) continue;
    try {
      json record = json::parse(line);
      Claim claim;
      claim.id = record.at("id").get<std::int64_t>();
      claim.text = record.at("claim").get<std::string>();
      std::string label_text = record.at("label").get<std::string>();
      auto label = parse_label(label_text);
      if (!label) throw DataError("unknown label '" + label_text + "'");
      claim.label = *label;
      for (const auto& group : record.at("evidence")) {
        std::vector<EvidenceId> pairs;
        for (const auto& item : group) {
          if (!item.is_array() || item.size() != 4) {
            throw DataError("evidence element must have 4 fields");
          }
          if (item[2].is_null() || item[3].is_null()) continue;
          pairs.push_back({item[2].get<std::string>(), item[3].get<int>()});
        }
        if (!pairs.empty()) claim.evidence_groups.push_back(std::move(pairs));
      }
      claims.push_back(std::move(claim));
    } catch (const json::exception& e) {
      throw DataError(where(source_name, line_number) + ": unparsable claim: " + e.what());
    } catch (const DataError& e) {
      throw DataError(where(source_name, line_number) + ": " + e.what());
    }
  }
  return claims;
}

std::vector<Claim> load_claims(const std::filesystem::path& path) {
  std::vector<Claim> claims;
  for (const auto& file : input_files(path)) {
    auto in = open_input(file);
    auto part = read_claims(in, file.string());
    claims.insert(claims.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
  }
  return claims;
}

void write_claims(const std::vector<Claim>& claims, std::ostream& out) {
  for (const auto& claim : claims) {
    json evidence = json::array();
    if (claim.evidence_groups.empty()) {
      evidence.push_back(json::array({json::array({0, 0, nullptr, nullptr})}));
    }
    std::int64_t annotation = 0;
    for (const auto& group : claim.evidence_groups) {
      json g = json::array();
      ++annotation;
      for (const auto& pair : group) {
        g.push_back(json::array({annotation, 0, pair.doc_id, pair.sentence_index}));
      }
      evidence.push_back(std::move(g));
    }
    json record = {{"id", claim.id},
                   {"verifiable", claim.verifiable() ? "VERIFIABLE" : "NOT VERIFIABLE"},
                   {"label", label_name(claim.label)},
                   {"claim", claim.text},
                   {"evidence", std::move(evidence)}};
    out << record.dump() << '\n';
  }
}

void validate_claim(const Claim& claim, const Corpus& corpus) {
  for (const auto& group : claim.evidence_groups) {
    for (const auto& pair : group) {
      if (!corpus.find_sentence(pair)) {
        throw DataError("claim " + std::to_string(claim.id) + ": evidence (" +
                        pair.doc_id + ", " + std::to_string(pair.sentence_index) +
                        ") does not resolve in the corpus");
      }
    }
  }
}

GoldTargets gold_targets(const Claim& claim, const Corpus* corpus) {
  if (!claim.verifiable()) {
    throw DataError("claim " + std::to_string(claim.id) +
                    " is NOT ENOUGH INFO and has no gold targets");
  }
  if (corpus) validate_claim(claim, *corpus);

  GoldTargets targets;
  std::set<EvidenceId> seen_pairs;
  std::set<std::string, std::less<>> seen_docs;
  for (const auto& group : claim.evidence_groups) {
    for (const auto& pair : group) {
      if (!seen_pairs.insert(pair).second) continue;
      targets.evidence.push_back(pair);
      if (seen_docs.insert(pair.doc_id).second) {
        targets.doc_ids.push_back(pair.doc_id);
        targets.titles.push_back(corpus ? corpus->find(pair.doc_id)->title
                                        : decode_title(pair.doc_id));
      }
    }
  }
  return targets;
}

}  // namespace gere
