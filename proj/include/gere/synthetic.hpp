#pragma once

// Seeded generator of small FEVER-shaped datasets for tests, the acceptance
// suite and the gen-synthetic command.

#include <cstdint>
#include <string>
#include <vector>

#include "gere/corpus.hpp"

namespace gere {

struct SyntheticOptions {
  std::size_t n_docs = 200;
  int min_sentences = 3;
  int max_sentences = 8;
  int min_sentence_words = 5;
  int max_sentence_words = 10;
  std::size_t n_claims = 300;
  int max_gold_docs = 2;
  int max_gold_sentences = 3;
  std::size_t word_pool = 600;
  // Share of titles formed as "<existing title> (<qualifier>)", so some
  // titles are strict token prefixes of others.
  double qualified_title_fraction = 0.15;
  double nei_fraction = 0.0;
  // Share of verifiable claims given a second, alternative evidence group.
  double extra_group_fraction = 0.0;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Corpus corpus;
  std::vector<Claim> claims;
};

// Inverse of decode_title for the characters the generator uses.
std::string encode_title(const std::string& title);

// Distinct pronounceable lowercase words, deterministic in `seed`.
std::vector<std::string> make_word_pool(std::size_t count, std::uint64_t seed);

// Unique capitalised titles of one or two pool words, some qualified as
// "Name (qualifier)". Titles never tokenize identically.
std::vector<std::string> make_titles(std::size_t count, std::uint64_t seed, double qualified_fraction = 0.15,
                                     std::size_t word_pool = 600);

// Documents get random sentences; each verifiable claim names its gold
// documents by title and quotes a few words of each gold sentence, so the
// mapping from claim to evidence is learnable.
SyntheticData generate_synthetic(const SyntheticOptions& options);

}  // namespace gere
