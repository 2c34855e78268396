#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "conmask/embeddings.hpp"
#include "conmask/knowledge_graph.hpp"

namespace conmask {

// Versioned binary corpus: the tokenized graph plus the vocabulary-restricted
// word vectors, so later commands never re-tokenize.
//   char[8] "CMBUNDLE", u32 version, string stop-list version, u64 min_count,
//   entities (u32 count, per entity: id, name tokens, description tokens),
//   relations (u32 count, per relation: id, name tokens),
//   triples (u64 count, 3 x i32 each),
//   words (u32 count, strings), u64 dim, f64 matrix [words x dim].
// Strings are u32 length + bytes; token lists are u32 count + strings.
inline constexpr std::uint32_t kBundleVersion = 1;

struct CorpusBundle {
  KnowledgeGraph graph;
  EmbeddingTable embeddings;
  std::string stop_list_version;
  std::uint64_t min_count = 0;
};

CorpusBundle build_bundle(const std::filesystem::path& triples, const std::filesystem::path& names,
                          const std::filesystem::path& descriptions,
                          const std::filesystem::path& vectors, std::size_t min_count = 0);

std::string serialize_bundle(const CorpusBundle& bundle);
CorpusBundle deserialize_bundle(const std::string& bytes);
void write_bundle(const std::filesystem::path& path, const CorpusBundle& bundle);
CorpusBundle read_bundle(const std::filesystem::path& path);

}  // namespace conmask
