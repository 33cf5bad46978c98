#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gere/corpus.hpp"

namespace gere {

using TokenId = std::int32_t;
using TokenSpan = std::span<const TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kUnk = 4;
inline constexpr TokenId kEot = 5;  // end of title
inline constexpr int kNumSpecials = 6;

// Splits lowercased ASCII text on whitespace; every ASCII punctuation
// character becomes a token of its own. Bytes >= 0x80 are word characters.
std::vector<std::string> split_words(std::string_view text);

class Vocab {
 public:
  // Vocabulary holding only the reserved specials.
  Vocab();
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const;
  // kUnk for unknown tokens.
  TokenId id(std::string_view token) const;

  std::vector<TokenId> encode(std::string_view text) const;
  // Specials are dropped; throws std::out_of_range on an invalid id.
  std::string decode(TokenSpan ids) const;

  // FNV-1a over the newline-joined token list; ties tries and checkpoints
  // to the vocabulary they were built with.
  std::uint64_t checksum() const;

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Frequency-ranked vocabulary over titles, sentences and claim texts; ties
// are broken lexicographically. `max_size` counts the six specials.
Vocab build_vocab(const Corpus& corpus, const std::vector<Claim>& claims,
                  std::size_t max_size);

}  // namespace gere
