#include "gere/title_trie.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <limits>
#include <fstream>
#include <map>
#include <memory>
#include <set>

namespace gere {
namespace {

constexpr std::array<char, 8> kMagic = {'G', 'E', 'R', 'E', 'T', 'R', 'I', 'E'};
constexpr std::uint32_t kFormatVersion = 1;

struct BuildNode {
  std::map<TokenId, std::unique_ptr<BuildNode>> children;
  const std::string* doc_id = nullptr;
};

void write_varint(std::ostream& out, std::uint64_t value) {
  while (value >= 0x80) {
    out.put(static_cast<char>((value & 0x7f) | 0x80));
    value >>= 7;
  }
  out.put(static_cast<char>(value));
}

std::uint64_t read_varint(std::istream& in) {
  std::uint64_t value = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    int byte = in.get();
    if (byte == std::char_traits<char>::eof()) throw DataError("truncated trie file");
    value |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if (!(byte & 0x80)) return value;
  }
  throw DataError("corrupt varint in trie file");
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError("truncated trie file");
  }
  return value;
}

// Fills subtree_size and terminal_count; children always follow their
// parent in preorder.
void finalize_counts(std::vector<TitleTrie::Node>& nodes) {
  for (std::size_t i = nodes.size(); i-- > 0;) {
    auto& n = nodes[i];
    n.subtree_size = 1;
    n.terminal_count = n.terminal >= 0 ? 1 : 0;
    for (const auto& [token, c] : n.children) {
      n.subtree_size += nodes[c].subtree_size;
      n.terminal_count += nodes[c].terminal_count;
    }
  }
}

}  // namespace

TitleTrie TitleTrie::build(const std::vector<Entry>& titles, const Vocab& vocab) {
  if (titles.empty()) throw DataError("cannot build a title trie from zero titles");

  BuildNode root;
  std::set<std::string_view> seen_ids;
  std::map<const std::string*, const std::string*> title_of;
  for (const auto& entry : titles) {
    if (!seen_ids.insert(entry.doc_id).second) {
      throw DataError("duplicate doc_id '" + entry.doc_id + "' in title list");
    }
    BuildNode* node = &root;
    std::vector<TokenId> path = vocab.encode(entry.title);
    path.push_back(kEot);
    for (TokenId t : path) {
      auto& slot = node->children[t];
      if (!slot) slot = std::make_unique<BuildNode>();
      node = slot.get();
    }
    if (node->doc_id) {
      throw DataError("titles '" + *title_of[node->doc_id] + "' (" + *node->doc_id +
                      ") and '" + entry.title + "' (" + entry.doc_id +
                      ") have identical token sequences");
    }
    node->doc_id = &entry.doc_id;
    title_of[&entry.doc_id] = &entry.title;
  }

  TitleTrie trie;
  trie.vocab_checksum_ = vocab.checksum();
  // Recursion depth is bounded by the longest title.
  auto layout = [&trie](auto& self, const BuildNode& b) -> NodeIndex {
    auto index = static_cast<NodeIndex>(trie.nodes_.size());
    trie.nodes_.emplace_back();
    if (b.doc_id) {
      trie.nodes_[index].terminal = static_cast<std::int32_t>(trie.doc_ids_.size());
      trie.doc_ids_.push_back(*b.doc_id);
    }
    for (const auto& [token, child] : b.children) {
      NodeIndex c = self(self, *child);
      trie.nodes_[index].children.emplace_back(token, c);
    }
    return index;
  };
  layout(layout, root);
  finalize_counts(trie.nodes_);
  return trie;
}

TitleTrie TitleTrie::build(const Corpus& corpus, const Vocab& vocab) {
  std::vector<Entry> titles;
  titles.reserve(corpus.size());
  for (const auto& [id, doc] : corpus.documents()) titles.push_back({doc.title, doc.doc_id});
  return build(titles, vocab);
}

std::optional<TitleTrie::NodeIndex> TitleTrie::child(NodeIndex node, TokenId token) const {
  const auto& children = nodes_[node].children;
  auto it = std::lower_bound(children.begin(), children.end(), token,
                             [](const auto& edge, TokenId t) { return edge.first < t; });
  if (it == children.end() || it->first != token) return std::nullopt;
  return it->second;
}

std::optional<TitleTrie::NodeIndex> TitleTrie::walk(TokenSpan prefix) const {
  if (nodes_.empty()) return std::nullopt;
  NodeIndex node = kRoot;
  for (TokenId t : prefix) {
    auto next = child(node, t);
    if (!next) return std::nullopt;
    node = *next;
  }
  return node;
}

std::vector<TokenId> TitleTrie::allowed_next(TokenSpan prefix) const {
  std::vector<TokenId> tokens;
  if (auto node = walk(prefix)) {
    for (const auto& [token, c] : nodes_[*node].children) tokens.push_back(token);
  }
  return tokens;
}

const std::string& TitleTrie::resolve(TokenSpan tokens) const {
  auto node = walk(tokens);
  if (!node || nodes_[*node].terminal < 0) {
    throw DataError("token path does not end at a complete title");
  }
  return doc_ids_[nodes_[*node].terminal];
}

std::vector<std::vector<TokenId>> TitleTrie::title_sequences() const {
  std::vector<std::vector<TokenId>> sequences(doc_ids_.size());
  std::vector<TokenId> path;
  auto visit = [&](auto& self, NodeIndex n) -> void {
    if (nodes_[n].terminal >= 0) {
      // The last edge into a terminal is EOT.
      sequences[nodes_[n].terminal].assign(path.begin(), path.end() - 1);
    }
    for (const auto& [token, c] : nodes_[n].children) {
      path.push_back(token);
      self(self, c);
      path.pop_back();
    }
  };
  if (!nodes_.empty()) visit(visit, kRoot);
  return sequences;
}

void TitleTrie::save(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  write_pod<std::uint32_t>(out, kFormatVersion);
  write_pod<std::uint64_t>(out, vocab_checksum_);
  write_pod<std::uint64_t>(out, nodes_.size());
  // nodes_ is already in preorder.
  for (const auto& n : nodes_) {
    write_varint(out, n.children.size());
    TokenId previous = 0;
    for (const auto& [token, c] : n.children) {
      write_varint(out, static_cast<std::uint64_t>(token - previous));
      previous = token;
    }
    if (n.terminal >= 0) {
      out.put(1);
      const std::string& id = doc_ids_[n.terminal];
      write_varint(out, id.size());
      out.write(id.data(), static_cast<std::streamsize>(id.size()));
    } else {
      out.put(0);
    }
  }
  if (!out) throw DataError("failed writing trie");
}

void TitleTrie::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save(out);
}

TitleTrie TitleTrie::load(std::istream& in, const Vocab* vocab) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError("not a title trie file (bad magic)");
  }
  if (auto version = read_pod<std::uint32_t>(in); version != kFormatVersion) {
    throw DataError("unsupported trie format version " + std::to_string(version));
  }
  TitleTrie trie;
  trie.vocab_checksum_ = read_pod<std::uint64_t>(in);
  if (vocab && vocab->checksum() != trie.vocab_checksum_) {
    throw DataError("trie was built with a different vocabulary");
  }
  auto count = read_pod<std::uint64_t>(in);
  if (count == 0 || count > (std::uint64_t{1} << 32)) throw DataError("bad trie node count");
  trie.nodes_.reserve(count);

  auto read_node = [&] {
    Node n;
    auto children = read_varint(in);
    if (children > count) throw DataError("corrupt trie node");
    TokenId token = 0;
    for (std::uint64_t k = 0; k < children; ++k) {
      token += static_cast<TokenId>(read_varint(in));
      n.children.emplace_back(token, 0);
    }
    int flag = in.get();
    if (flag == 1) {
      auto length = read_varint(in);
      std::string id(length, '\0');
      if (!in.read(id.data(), static_cast<std::streamsize>(length))) {
        throw DataError("truncated trie file");
      }
      n.terminal = static_cast<std::int32_t>(trie.doc_ids_.size());
      trie.doc_ids_.push_back(std::move(id));
    } else if (flag != 0) {
      throw DataError("corrupt trie node flag");
    }
    trie.nodes_.push_back(std::move(n));
  };

  // Rebuild child links from the preorder stream.
  read_node();
  std::vector<std::pair<NodeIndex, std::size_t>> stack{{kRoot, 0}};
  while (!stack.empty()) {
    auto& [parent, next] = stack.back();
    if (next == trie.nodes_[parent].children.size()) {
      stack.pop_back();
      continue;
    }
    if (trie.nodes_.size() >= count) throw DataError("trie node count mismatch");
    auto index = static_cast<NodeIndex>(trie.nodes_.size());
    trie.nodes_[parent].children[next++].second = index;
    read_node();
    stack.emplace_back(index, 0);
  }
  if (trie.nodes_.size() != count) throw DataError("trie node count mismatch");
  finalize_counts(trie.nodes_);
  return trie;
}

TitleTrie TitleTrie::load(const std::filesystem::path& path, const Vocab* vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return load(in, vocab);
}

}  // namespace gere
