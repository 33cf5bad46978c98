#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gere/tokenizer.hpp"

namespace gere {

// Token-level prefix tree over every corpus title. Each title is stored as
// its token sequence followed by an EOT edge; the node reached through the
// EOT edge is terminal and carries the doc_id. Nodes are kept in depth-first
// preorder with children sorted by token id, so the layout (and the
// serialized bytes) do not depend on insertion order.
class TitleTrie {
 public:
  using NodeIndex = std::uint32_t;
  static constexpr NodeIndex kRoot = 0;

  struct Node {
    std::vector<std::pair<TokenId, NodeIndex>> children;  // sorted by token
    std::int32_t terminal = -1;       // index into doc_ids(), or -1
    std::uint32_t subtree_size = 1;   // nodes in this subtree, self included
    std::uint32_t terminal_count = 0; // terminals in this subtree

    friend bool operator==(const Node&, const Node&) = default;
  };

  struct Entry {
    std::string title;
    std::string doc_id;
  };

  // Throws DataError for an empty title list, duplicate doc_ids, or two
  // doc_ids whose titles tokenize identically.
  static TitleTrie build(const std::vector<Entry>& titles, const Vocab& vocab);
  static TitleTrie build(const Corpus& corpus, const Vocab& vocab);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t title_count() const { return doc_ids_.size(); }
  const Node& node(NodeIndex index) const { return nodes_.at(index); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  std::uint64_t vocab_checksum() const { return vocab_checksum_; }

  std::optional<NodeIndex> child(NodeIndex node, TokenId token) const;
  std::optional<NodeIndex> walk(TokenSpan prefix) const;

  // Sorted tokens with an outgoing edge from the node reached by `prefix`;
  // empty when the prefix leaves the trie.
  std::vector<TokenId> allowed_next(TokenSpan prefix) const;

  // `tokens` must spell a full title followed by EOT.
  const std::string& resolve(TokenSpan tokens) const;

  // Title token sequence (without EOT) for every terminal, by terminal index.
  std::vector<std::vector<TokenId>> title_sequences() const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static TitleTrie load(std::istream& in, const Vocab* vocab = nullptr);
  static TitleTrie load(const std::filesystem::path& path, const Vocab* vocab = nullptr);

  friend bool operator==(const TitleTrie&, const TitleTrie&) = default;

 private:
  std::vector<Node> nodes_;
  std::vector<std::string> doc_ids_;  // ordered by terminal preorder
  std::uint64_t vocab_checksum_ = 0;
};

}  // namespace gere
