#include "gere/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "gere/tokenizer.hpp"

namespace gere {
namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "sh"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
constexpr const char* kQualifiers[] = {"film", "band", "album", "novel", "river", "song"};

template <typename T, std::size_t N>
const T& pick(const T (&options)[N], std::mt19937_64& rng) {
  return options[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::string capitalise(std::string word) {
  if (!word.empty()) word[0] = static_cast<char>(word[0] - 'a' + 'A');
  return word;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::string encode_title(const std::string& title) {
  std::string out;
  for (char c : title) {
    switch (c) {
      case ' ': out += '_'; break;
      case '(': out += "-LRB-"; break;
      case ')': out += "-RRB-"; break;
      case ':': out += "-COLON-"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> make_word_pool(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::string> seen(std::begin(kQualifiers), std::end(kQualifiers));
  std::vector<std::string> words;
  while (words.size() < count) {
    std::string w;
    int syllables = uniform(rng, 2, 3);
    for (int s = 0; s < syllables; ++s) w += std::string(pick(kOnsets, rng)) + pick(kVowels, rng);
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

std::vector<std::string> make_titles(std::size_t count, std::uint64_t seed, double qualified_fraction,
                                     std::size_t word_pool) {
  std::mt19937_64 rng(seed ^ 0x7469746c65ULL);
  auto words = make_word_pool(word_pool, seed);
  std::uniform_int_distribution<std::size_t> any_word(0, words.size() - 1);
  std::set<std::vector<std::string>> seen;  // token sequences
  std::vector<std::string> titles;
  std::size_t attempts = 0;
  while (titles.size() < count) {
    if (++attempts > count * 100 + 1000) throw std::invalid_argument("make_titles: word pool too small");
    std::string title;
    if (!titles.empty() && chance(rng, qualified_fraction)) {
      const auto& base = titles[std::uniform_int_distribution<std::size_t>(0, titles.size() - 1)(rng)];
      if (base.find('(') != std::string::npos) continue;
      title = base + " (" + pick(kQualifiers, rng) + ")";
    } else {
      title = capitalise(words[any_word(rng)]);
      if (chance(rng, 0.5)) title += " " + capitalise(words[any_word(rng)]);
    }
    if (seen.insert(split_words(title)).second) titles.push_back(std::move(title));
  }
  return titles;
}

SyntheticData generate_synthetic(const SyntheticOptions& o) {
  if (o.n_docs == 0 || o.min_sentences < 1 || o.max_sentences < o.min_sentences ||
      o.min_sentence_words < 1 || o.max_sentence_words < o.min_sentence_words || o.max_gold_docs < 1 ||
      o.max_gold_sentences < 1) {
    throw std::invalid_argument("generate_synthetic: inconsistent options");
  }
  std::mt19937_64 rng(o.seed);
  auto words = make_word_pool(o.word_pool, o.seed + 1);
  auto titles = make_titles(o.n_docs, o.seed + 2, o.qualified_title_fraction, o.word_pool);
  std::uniform_int_distribution<std::size_t> any_word(0, words.size() - 1);

  SyntheticData data;
  std::vector<const Document*> docs;
  for (const auto& title : titles) {
    Document doc{encode_title(title), title, {}};
    int n = uniform(rng, o.min_sentences, o.max_sentences);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> sentence;
      int len = uniform(rng, o.min_sentence_words, o.max_sentence_words);
      for (int w = 0; w < len; ++w) sentence.push_back(words[any_word(rng)]);
      doc.sentences.push_back({i, join_words(sentence) + " ."});
    }
    data.corpus.add(std::move(doc));
  }
  for (const auto& [id, doc] : data.corpus.documents()) docs.push_back(&doc);

  auto quote = [&](const Sentence& s, int count) {
    auto tokens = split_words(s.text);
    tokens.pop_back();  // trailing period
    std::vector<std::string> picked;
    int start = uniform(rng, 0, std::max(0, static_cast<int>(tokens.size()) - count));
    for (int k = start; k < std::min<int>(start + count, static_cast<int>(tokens.size())); ++k) {
      picked.push_back(tokens[static_cast<std::size_t>(k)]);
    }
    return join_words(picked);
  };

  for (std::size_t c = 0; c < o.n_claims; ++c) {
    Claim claim;
    claim.id = static_cast<std::int64_t>(c + 1);
    if (chance(rng, o.nei_fraction)) {
      claim.label = Label::kNotEnoughInfo;
      std::vector<std::string> text;
      for (int w = 0; w < uniform(rng, 4, 8); ++w) text.push_back(words[any_word(rng)]);
      claim.text = capitalise(join_words(text)) + " .";
      data.claims.push_back(std::move(claim));
      continue;
    }
    claim.label = chance(rng, 0.5) ? Label::kSupports : Label::kRefutes;

    // Gold documents, then 1..max_gold_sentences sentences spread so that
    // every gold document contributes at least one.
    int n_docs = uniform(rng, 1, o.max_gold_docs);
    std::vector<const Document*> gold_docs;
    while (static_cast<int>(gold_docs.size()) < n_docs) {
      const Document* d = docs[std::uniform_int_distribution<std::size_t>(0, docs.size() - 1)(rng)];
      if (std::find(gold_docs.begin(), gold_docs.end(), d) == gold_docs.end()) gold_docs.push_back(d);
    }
    int n_sentences = uniform(rng, n_docs, std::max(n_docs, o.max_gold_sentences));
    std::vector<std::vector<int>> chosen(gold_docs.size());
    for (int s = 0; s < n_sentences; ++s) {
      std::size_t d = s < n_docs ? static_cast<std::size_t>(s)
                                 : std::uniform_int_distribution<std::size_t>(0, gold_docs.size() - 1)(rng);
      const auto& sentences = gold_docs[d]->sentences;
      if (chosen[d].size() >= sentences.size()) continue;
      int idx;
      do {
        idx = sentences[std::uniform_int_distribution<std::size_t>(0, sentences.size() - 1)(rng)].index;
      } while (std::find(chosen[d].begin(), chosen[d].end(), idx) != chosen[d].end());
      chosen[d].push_back(idx);
    }

    std::vector<EvidenceId> group;
    std::vector<std::string> text;
    for (std::size_t d = 0; d < gold_docs.size(); ++d) {
      std::sort(chosen[d].begin(), chosen[d].end());
      text.push_back(gold_docs[d]->title);
      for (int idx : chosen[d]) {
        group.push_back({gold_docs[d]->doc_id, idx});
        text.push_back(quote(*gold_docs[d]->find_sentence(idx), uniform(rng, 2, 3)));
      }
    }
    claim.text = join_words(text) + " .";
    claim.evidence_groups.push_back(group);
    if (group.size() > 1 && chance(rng, o.extra_group_fraction)) {
      claim.evidence_groups.push_back({group.front()});
    }
    data.claims.push_back(std::move(claim));
  }
  return data;
}

}  // namespace gere
