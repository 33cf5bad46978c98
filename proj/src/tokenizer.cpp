#include "gere/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace gere {
namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {"<pad>", "<s>",   "</s>",
                                                    "<sep>", "<unk>", "<eot>"};
  return specials;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    auto c = static_cast<unsigned char>(raw);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, raw);
    } else {
      current += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    }
  }
  flush();
  return words;
}

Vocab::Vocab() : Vocab(special_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto& specials = special_tokens();
  if (tokens_.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens_.begin())) {
    throw DataError("vocabulary must start with the six reserved specials");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

TokenId Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& word : split_words(text)) ids.push_back(id(word));
  return ids;
}

std::string Vocab::decode(TokenSpan ids) const {
  std::string text;
  for (TokenId id : ids) {
    const std::string& t = token(id);
    if (id < kNumSpecials) continue;
    if (!text.empty()) text += ' ';
    text += t;
  }
  return text;
}

std::uint64_t Vocab::checksum() const {
  std::uint64_t hash = 14695981039346656037ull;
  for (const auto& t : tokens_) {
    for (char c : t) {
      hash ^= static_cast<unsigned char>(c);
      hash *= 1099511628211ull;
    }
    hash ^= '\n';
    hash *= 1099511628211ull;
  }
  return hash;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocab(std::move(tokens));
}

Vocab build_vocab(const Corpus& corpus, const std::vector<Claim>& claims,
                  std::size_t max_size) {
  if (max_size < kNumSpecials) {
    throw std::invalid_argument("max_size must be at least " +
                                std::to_string(kNumSpecials));
  }
  std::map<std::string, std::size_t> counts;
  auto count = [&](std::string_view text) {
    for (auto& w : split_words(text)) ++counts[std::move(w)];
  };
  for (const auto& [id, doc] : corpus.documents()) {
    count(doc.title);
    for (const auto& s : doc.sentences) count(s.text);
  }
  for (const auto& claim : claims) count(claim.text);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort by count keeps ties ordered.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens = special_tokens();
  for (auto& [word, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(std::move(word));
  }
  return Vocab(std::move(tokens));
}

}  // namespace gere
