#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gere {

// Raised for malformed or inconsistent input data. Maps to exit code 2 in
// the command-line tool.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sentence {
  int index = 0;
  std::string text;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Document {
  std::string doc_id;  // raw page identifier, e.g. "Foo_-LRB-film-RRB-"
  std::string title;   // display form, e.g. "Foo (film)"
  std::vector<Sentence> sentences;  // strictly increasing indices

  const Sentence* find_sentence(int index) const;

  friend bool operator==(const Document&, const Document&) = default;
};

// (doc_id, sentence_index) pair naming one evidence sentence.
struct EvidenceId {
  std::string doc_id;
  int sentence_index = 0;

  friend auto operator<=>(const EvidenceId&, const EvidenceId&) = default;
  friend bool operator==(const EvidenceId&, const EvidenceId&) = default;
};

// Immutable-after-load collection of documents keyed by doc_id, with a
// title index. Iteration order is by doc_id, so content does not depend on
// the order documents were added.
class Corpus {
 public:
  // Throws DataError on a duplicate doc_id, a duplicate title, an empty
  // title, or non-increasing sentence indices.
  void add(Document document);
  // Moves every document of `other` into this corpus with the same checks.
  void merge(Corpus&& other);

  const Document* find(std::string_view doc_id) const;
  const Document* find_by_title(std::string_view title) const;
  const Sentence* find_sentence(const EvidenceId& id) const;

  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }
  const std::map<std::string, Document, std::less<>>& documents() const {
    return documents_;
  }
  const std::map<std::string, std::string, std::less<>>& title_index() const {
    return title_index_;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::map<std::string, Document, std::less<>> documents_;
  std::map<std::string, std::string, std::less<>> title_index_;
};

// Underscores become spaces; -LRB-, -RRB-, -COLON- are decoded.
std::string decode_title(std::string_view doc_id);

// Parses the `lines` field of a wiki-page record ("idx<TAB>text[<TAB>...]"
// entries separated by newlines). Extra tab-separated fields (anchor
// annotations in the FEVER dump) are ignored.
std::vector<Sentence> parse_page_lines(std::string_view lines);

// Loads one .jsonl file, or every regular file in a directory (sorted by
// name) merged into a single corpus.
Corpus load_wiki_pages(const std::filesystem::path& path);
Corpus read_wiki_pages(std::istream& in, const std::string& source_name);
void write_wiki_pages(const Corpus& corpus, std::ostream& out);

enum class Label { kSupports, kRefutes, kNotEnoughInfo };

std::string_view label_name(Label label);
// Accepts the FEVER spellings, case-insensitively, plus "NEI".
std::optional<Label> parse_label(std::string_view text);

struct Claim {
  std::int64_t id = 0;
  std::string text;
  Label label = Label::kNotEnoughInfo;
  std::vector<std::vector<EvidenceId>> evidence_groups;

  bool verifiable() const { return label != Label::kNotEnoughInfo; }
  friend bool operator==(const Claim&, const Claim&) = default;
};

std::vector<Claim> load_claims(const std::filesystem::path& path);
std::vector<Claim> read_claims(std::istream& in, const std::string& source_name);
void write_claims(const std::vector<Claim>& claims, std::ostream& out);

// Fails with DataError when an evidence pair does not resolve in `corpus`.
void validate_claim(const Claim& claim, const Corpus& corpus);

struct GoldTargets {
  std::vector<std::string> titles;  // display titles, duplicate-free
  std::vector<std::string> doc_ids;  // parallel to titles
  std::vector<EvidenceId> evidence;
};

// Flattens the annotation groups into one target sequence: the first group
// in annotation order, then unseen pairs of later groups. Titles follow the
// first-occurrence order of their documents in that sequence. When a corpus
// is given every pair is validated against it and titles come from it.
GoldTargets gold_targets(const Claim& claim, const Corpus* corpus = nullptr);

}  // namespace gere
