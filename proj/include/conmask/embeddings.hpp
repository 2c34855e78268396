#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "conmask/graph.hpp"
#include "conmask/knowledge_graph.hpp"

namespace conmask {

inline constexpr std::int32_t kOovIndex = 0;
inline constexpr std::int32_t kPadIndex = -1;
inline constexpr std::string_view kOovToken = "<unk>";

// Word vectors restricted to a corpus vocabulary. Row 0 is the reserved
// out-of-vocabulary row (zeros at load time); the remaining rows follow
// the order of the vectors file.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> words, nk::Tensor matrix, bool trainable = true);

  std::size_t size() const { return words_.size(); }
  std::size_t dim() const { return vectors.value.cols(); }
  const std::vector<std::string>& words() const { return words_; }
  // Index of a word, kOovIndex when absent.
  std::int32_t lookup(std::string_view word) const;
  bool contains(std::string_view word) const { return index_.contains(std::string(word)); }
  std::vector<std::int32_t> lookup_all(std::span<const std::string> tokens) const;

  nk::Parameter vectors{"word_vectors", nk::Tensor()};

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Parses `word v1 ... vk` lines. k is taken from the first line unless
// expected_dim is non-zero; any line with a different field count is a
// DataError carrying the line number. Only words in `vocabulary` are kept
// and the first occurrence of a word wins.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::unordered_set<std::string>& vocabulary,
                               std::size_t expected_dim = 0);

struct PaddedSequence {
  std::vector<std::int32_t> ids;  // exactly max_len entries, kPadIndex beyond valid
  std::size_t valid = 0;
};

// Keeps the first max_len ids and pads the rest with kPadIndex.
PaddedSequence truncate_pad(std::span<const std::int32_t> ids, std::size_t max_len);

// Token id sequences for every entity and relation, truncated to the
// configured maximum lengths. Descriptions that are empty fall back to the
// entity name.
struct Corpus {
  std::vector<std::vector<std::int32_t>> entity_name_ids;
  std::vector<std::vector<std::int32_t>> entity_desc_ids;
  std::vector<std::vector<std::int32_t>> relation_name_ids;
  std::vector<bool> description_fallback;

  static Corpus build(const KnowledgeGraph& g, const EmbeddingTable& table,
                      std::size_t max_content_len = 512, std::size_t max_name_len = 512);
};

}  // namespace conmask
