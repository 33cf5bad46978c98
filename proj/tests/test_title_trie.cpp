#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "gere/synthetic.hpp"
#include "gere/title_trie.hpp"
#include "test_util.hpp"

using namespace gere;

namespace {

Vocab vocab_for(const std::vector<std::string>& words) {
  std::vector<std::string> tokens = Vocab().tokens();
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocab(tokens);
}

std::vector<TitleTrie::Entry> entries(const std::vector<std::string>& titles) {
  std::vector<TitleTrie::Entry> out;
  for (const auto& t : titles) out.push_back({t, encode_title(t)});
  return out;
}

// Brute force: scan every title's tokens + EOT and collect the token after
// the prefix.
std::vector<TokenId> scan_next(const std::vector<std::vector<TokenId>>& sequences, const std::vector<TokenId>& prefix) {
  std::set<TokenId> next;
  for (auto seq : sequences) {
    seq.push_back(kEot);
    if (seq.size() > prefix.size() && std::equal(prefix.begin(), prefix.end(), seq.begin())) {
      next.insert(seq[prefix.size()]);
    }
  }
  return {next.begin(), next.end()};
}

}  // namespace

TEST_CASE("single title: root, token, EOT") {
  Vocab v = vocab_for({"a", "b", "c", "z"});
  auto trie = TitleTrie::build(entries({"a"}), v);
  CHECK(trie.node_count() == 3);
  CHECK(trie.allowed_next(std::vector<TokenId>{}) == std::vector<TokenId>{v.id("a")});
  std::vector<TokenId> path = {v.id("a"), kEot};
  CHECK(trie.resolve(path) == "a");
}

TEST_CASE("prefix title shares the node and branches on EOT") {
  Vocab v = vocab_for({"a", "b", "c", "z"});
  auto trie = TitleTrie::build(entries({"a", "a b"}), v);
  // root, a, a/EOT, a/b, a/b/EOT
  CHECK(trie.node_count() == 5);
  std::vector<TokenId> a = {v.id("a")};
  auto next = trie.allowed_next(a);
  CHECK(next == std::vector<TokenId>{kEot, v.id("b")});
  CHECK(trie.resolve(std::vector<TokenId>{v.id("a"), kEot}) == "a");
  CHECK(trie.resolve(std::vector<TokenId>{v.id("a"), v.id("b"), kEot}) == "a_b");
  CHECK_THROWS(trie.resolve(std::vector<TokenId>{v.id("a")}));
}

TEST_CASE("allowed_next examples") {
  Vocab v = vocab_for({"a", "b", "c", "z"});
  auto trie = TitleTrie::build(entries({"a", "b c"}), v);
  CHECK(trie.allowed_next(std::vector<TokenId>{}) == std::vector<TokenId>{v.id("a"), v.id("b")});
  CHECK(trie.allowed_next(std::vector<TokenId>{v.id("z")}).empty());
  CHECK(trie.allowed_next(std::vector<TokenId>{v.id("a"), kEot}).empty());
}

TEST_CASE("build errors") {
  Vocab v = vocab_for({"a", "b"});
  CHECK_THROWS_AS(TitleTrie::build(std::vector<TitleTrie::Entry>{}, v), DataError);
  CHECK_THROWS_AS(TitleTrie::build(std::vector<TitleTrie::Entry>{{"a", "X"}, {"b", "X"}}, v), DataError);
  try {
    TitleTrie::build(std::vector<TitleTrie::Entry>{{"A b", "P"}, {"a  B", "Q"}}, v);
    FAIL("expected collision");
  } catch (const DataError& e) {
    std::string what = e.what();
    CHECK(what.find("A b") != std::string::npos);
    CHECK(what.find("a  B") != std::string::npos);
  }
}

TEST_CASE("insertion order does not matter") {
  auto titles = make_titles(300, 5);
  Corpus c;
  for (const auto& t : titles) c.add(Document{encode_title(t), t, {{0, "x"}}});
  Vocab v = build_vocab(c, {}, 10000);
  auto forward = entries(titles);
  auto backward = forward;
  std::reverse(backward.begin(), backward.end());
  CHECK(TitleTrie::build(forward, v) == TitleTrie::build(backward, v));
}

TEST_CASE("random titles: brute-force agreement, bijection, node bound") {
  auto titles = make_titles(500, 11, 0.3, 120);
  Corpus c;
  for (const auto& t : titles) c.add(Document{encode_title(t), t, {{0, "x"}}});
  // A truncated vocabulary so some titles contain UNK.
  Vocab v = build_vocab(c, {}, 100);
  std::vector<TitleTrie::Entry> list;
  for (const auto& t : titles) list.push_back({t, encode_title(t)});
  // UNK can make two titles collide; keep one per token sequence.
  std::set<std::vector<TokenId>> seen;
  std::vector<TitleTrie::Entry> unique;
  for (auto& e : list) {
    if (seen.insert(v.encode(e.title)).second) unique.push_back(e);
  }
  auto trie = TitleTrie::build(unique, v);

  std::size_t total_tokens = 0;
  std::vector<std::vector<TokenId>> sequences;
  for (const auto& e : unique) {
    sequences.push_back(v.encode(e.title));
    total_tokens += sequences.back().size() + 1;
    auto path = sequences.back();
    path.push_back(kEot);
    CHECK(trie.resolve(path) == e.doc_id);
  }
  CHECK(trie.node_count() <= 1 + total_tokens);
  CHECK(trie.title_count() == unique.size());

  std::mt19937_64 rng(2);
  for (int q = 0; q < 2000; ++q) {
    std::vector<TokenId> prefix;
    if (rng() % 4 != 0) {
      const auto& seq = sequences[rng() % sequences.size()];
      prefix.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(rng() % (seq.size() + 1)));
    }
    if (rng() % 5 == 0) prefix.push_back(static_cast<TokenId>(rng() % v.size()));
    CHECK(trie.allowed_next(prefix) == scan_next(sequences, prefix));
  }

  // title_sequences is indexed by terminal, parallel to doc_ids.
  auto from_trie = trie.title_sequences();
  for (std::size_t i = 0; i < from_trie.size(); ++i) {
    auto path = from_trie[i];
    path.push_back(kEot);
    CHECK(trie.resolve(path) == trie.doc_ids()[i]);
  }
}

TEST_CASE("subtree bookkeeping") {
  Vocab v = vocab_for({"a", "b", "c"});
  auto trie = TitleTrie::build(entries({"a", "a b", "a c", "b"}), v);
  CHECK(trie.node(TitleTrie::kRoot).subtree_size == trie.node_count());
  CHECK(trie.node(TitleTrie::kRoot).terminal_count == 4);
  auto a = trie.child(TitleTrie::kRoot, v.id("a"));
  REQUIRE(a);
  CHECK(trie.node(*a).terminal_count == 3);
}

TEST_CASE("persistence: round trip and checksum validation") {
  auto titles = make_titles(200, 3);
  Corpus c;
  for (const auto& t : titles) c.add(Document{encode_title(t), t, {{0, "x"}}});
  Vocab v = build_vocab(c, {}, 10000);
  auto trie = TitleTrie::build(c, v);
  std::stringstream buffer;
  trie.save(buffer);
  std::string bytes = buffer.str();
  CHECK(bytes.substr(0, 8) == "GERETRIE");
  auto back = TitleTrie::load(buffer, &v);
  CHECK(back == trie);
  std::stringstream again;
  back.save(again);
  CHECK(again.str() == bytes);

  std::stringstream other(bytes);
  Vocab different = vocab_for({"q"});
  CHECK_THROWS_AS(TitleTrie::load(other, &different), DataError);
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(TitleTrie::load(truncated), DataError);
  std::stringstream bad_magic("GERETRIX" + bytes.substr(8));
  CHECK_THROWS_AS(TitleTrie::load(bad_magic), DataError);
}
