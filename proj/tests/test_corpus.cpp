#include <doctest.h>

#include <sstream>

#include "gere/corpus.hpp"
#include "test_util.hpp"

using namespace gere;

namespace {

Corpus read_pages(const std::string& text) {
  std::istringstream in(text);
  return read_wiki_pages(in, "pages.jsonl");
}

std::vector<Claim> read_claim_text(const std::string& text) {
  std::istringstream in(text);
  return read_claims(in, "claims.jsonl");
}

}  // namespace

TEST_CASE("wiki pages: single record") {
  Corpus c = read_pages(R"({"id": "A", "text": "", "lines": "0\tHello world."})" "\n");
  REQUIRE(c.size() == 1);
  const Document* doc = c.find("A");
  REQUIRE(doc);
  REQUIRE(doc->sentences.size() == 1);
  CHECK(doc->sentences[0].index == 0);
  CHECK(doc->sentences[0].text == "Hello world.");
}

TEST_CASE("wiki pages: empty input gives an empty corpus") {
  CHECK(read_pages("").empty());
}

TEST_CASE("wiki pages: escape sequences decoded in the title only") {
  Corpus c = read_pages(R"({"id": "Foo_-LRB-film-RRB-", "lines": "0\tx"})" "\n");
  const Document* doc = c.find("Foo_-LRB-film-RRB-");
  REQUIRE(doc);
  CHECK(doc->title == "Foo (film)");
  CHECK(doc->doc_id == "Foo_-LRB-film-RRB-");
  CHECK(decode_title("Star_Wars-COLON-_Episode") == "Star Wars: Episode");
  CHECK(c.find_by_title("Foo (film)") == doc);
}

TEST_CASE("wiki pages: blank index-0 line preserved, anchor fields ignored") {
  auto sentences = parse_page_lines("0\t\n1\tSecond one.\tanchor\tTarget\n\n3\tFourth.");
  REQUIRE(sentences.size() == 3);
  CHECK(sentences[0].index == 0);
  CHECK(sentences[0].text.empty());
  CHECK(sentences[1].text == "Second one.");
  CHECK(sentences[2].index == 3);
}

TEST_CASE("wiki pages: errors name the file and line") {
  try {
    read_pages(R"({"id": "A", "lines": "0\tok"})" "\n" "{not json\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("pages.jsonl:2") != std::string::npos);
  }
  CHECK_THROWS_AS(read_pages(R"({"id": "A", "lines": ""})" "\n" R"({"id": "A", "lines": ""})" "\n"), DataError);
  CHECK_THROWS_AS(read_pages(R"({"id": "A", "lines": "1\tx\n0\ty"})" "\n"), DataError);
}

TEST_CASE("wiki pages: write then read round-trips") {
  Corpus c;
  c.add(testing::make_doc("Alpha", {"", "one .", "two"}));
  c.add(testing::make_doc("Beta_-LRB-band-RRB-", {"x\ty"}));
  Document sparse{"Gamma", "Gamma", {{2, "two"}, {5, "five"}}};
  c.add(sparse);
  std::ostringstream out;
  write_wiki_pages(c, out);
  Corpus back = read_pages(out.str());
  CHECK(back.size() == 3);
  CHECK(back.find("Gamma")->sentences == sparse.sentences);
  CHECK(back.find("Alpha")->sentences == c.find("Alpha")->sentences);
}

TEST_CASE("corpus content does not depend on load order") {
  std::string a = R"({"id": "A", "lines": "0\ta"})" "\n";
  std::string b = R"({"id": "B", "lines": "0\tb"})" "\n";
  CHECK(read_pages(a + b) == read_pages(b + a));
  Corpus merged = read_pages(b);
  merged.merge(read_pages(a));
  CHECK(merged == read_pages(a + b));
  CHECK(merged.title_index().size() == merged.documents().size());
}

TEST_CASE("claims: minimal supported claim") {
  auto claims = read_claim_text(
      R"({"id": 7, "claim": "A is b.", "label": "SUPPORTS", "evidence": [[[1, 2, "A", 0]]]})" "\n");
  REQUIRE(claims.size() == 1);
  CHECK(claims[0].id == 7);
  CHECK(claims[0].label == Label::kSupports);
  REQUIRE(claims[0].evidence_groups.size() == 1);
  CHECK(claims[0].evidence_groups[0] == std::vector<EvidenceId>{{"A", 0}});
}

TEST_CASE("claims: NEI null evidence gives no groups") {
  auto claims = read_claim_text(
      R"({"id": 1, "claim": "x", "label": "NOT ENOUGH INFO", "evidence": [[[5, null, null, null]]]})" "\n");
  REQUIRE(claims.size() == 1);
  CHECK(claims[0].label == Label::kNotEnoughInfo);
  CHECK(claims[0].evidence_groups.empty());
}

TEST_CASE("claims: groups kept in file order") {
  auto claims = read_claim_text(
      R"({"id": 2, "claim": "x", "label": "REFUTES", "evidence": [[[1, 1, "A", 3]], [[1, 2, "B", 0], [1, 3, "A", 1]]]})"
      "\n");
  REQUIRE(claims[0].evidence_groups.size() == 2);
  CHECK(claims[0].evidence_groups[0] == std::vector<EvidenceId>{{"A", 3}});
  CHECK(claims[0].evidence_groups[1] == std::vector<EvidenceId>{{"B", 0}, {"A", 1}});
}

TEST_CASE("claims: unknown label and bad lines") {
  CHECK_THROWS_AS(read_claim_text(R"({"id": 1, "claim": "x", "label": "MAYBE", "evidence": []})" "\n"), DataError);
  try {
    read_claim_text("\n{\"id\": 1}\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK(parse_label("supports") == Label::kSupports);
  CHECK(parse_label("not_enough_info") == Label::kNotEnoughInfo);
  CHECK(parse_label("NEI") == Label::kNotEnoughInfo);
}

TEST_CASE("claims: write then read round-trips") {
  std::vector<Claim> claims = {
      {1, "a", Label::kSupports, {{{"A", 0}, {"B", 2}}, {{"C", 1}}}},
      {2, "b \"quoted\"", Label::kNotEnoughInfo, {}},
  };
  std::ostringstream out;
  write_claims(claims, out);
  CHECK(read_claim_text(out.str()) == claims);
}

TEST_CASE("gold targets: flattening and first-occurrence order") {
  Claim single{1, "", Label::kSupports, {{{"A", 0}, {"A", 1}}}};
  auto g = gold_targets(single);
  CHECK(g.doc_ids == std::vector<std::string>{"A"});
  CHECK(g.evidence == std::vector<EvidenceId>{{"A", 0}, {"A", 1}});

  Claim dedup{2, "", Label::kSupports, {{{"A", 0}}, {{"A", 0}, {"B", 2}}}};
  g = gold_targets(dedup);
  CHECK(g.doc_ids == std::vector<std::string>{"A", "B"});
  CHECK(g.evidence == std::vector<EvidenceId>{{"A", 0}, {"B", 2}});

  Claim order{3, "", Label::kRefutes, {{{"B", 3}}, {{"A", 1}}}};
  CHECK(gold_targets(order).doc_ids == std::vector<std::string>{"B", "A"});

  Claim nei{4, "", Label::kNotEnoughInfo, {}};
  CHECK_THROWS(gold_targets(nei));
}

TEST_CASE("gold targets: validated against a corpus") {
  Corpus c;
  c.add(testing::make_doc("Foo_-LRB-film-RRB-", {"a", "b"}));
  Claim ok{1, "", Label::kSupports, {{{"Foo_-LRB-film-RRB-", 1}}}};
  auto g = gold_targets(ok, &c);
  CHECK(g.titles == std::vector<std::string>{"Foo (film)"});
  Claim missing_doc{2, "", Label::kSupports, {{{"Bar", 0}}}};
  Claim missing_sentence{3, "", Label::kSupports, {{{"Foo_-LRB-film-RRB-", 9}}}};
  CHECK_THROWS_AS(gold_targets(missing_doc, &c), DataError);
  CHECK_THROWS_AS(gold_targets(missing_sentence, &c), DataError);
}

TEST_CASE("gold targets invariants hold on a generated dataset") {
  // Random groups over a small corpus, including repeats across groups.
  Corpus c;
  for (int d = 0; d < 6; ++d) c.add(testing::make_doc("D" + std::to_string(d), {"a", "b", "c"}));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Claim claim{trial, "", Label::kSupports, {}};
    int groups = 1 + static_cast<int>(rng() % 3);
    for (int gi = 0; gi < groups; ++gi) {
      std::vector<EvidenceId> group;
      int n = 1 + static_cast<int>(rng() % 3);
      for (int k = 0; k < n; ++k) group.push_back({"D" + std::to_string(rng() % 6), static_cast<int>(rng() % 3)});
      claim.evidence_groups.push_back(group);
    }
    auto g = gold_targets(claim, &c);
    std::set<std::string> titles(g.doc_ids.begin(), g.doc_ids.end());
    CHECK(titles.size() == g.doc_ids.size());
    std::set<EvidenceId> evidence(g.evidence.begin(), g.evidence.end());
    CHECK(evidence.size() == g.evidence.size());
    for (const auto& e : g.evidence) CHECK(titles.count(e.doc_id) == 1);
  }
}
