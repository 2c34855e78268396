#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "conmask/knowledge_graph.hpp"

namespace conmask {

enum class SplitMode { kOpen, kClosed };

std::string to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view text);

struct SplitSpec {
  double entity_keep_fraction = 0.90;
  double edge_holdout_fraction = 0.10;
  // Share of the held-out pool that becomes the test set; the rest is
  // validation.
  double test_share = 0.5;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::kOpen;

  void validate() const;
};

struct SplitCounts {
  std::size_t entities = 0;
  std::size_t train_entities = 0;
  std::size_t triples = 0;
  std::size_t induced = 0;
  std::size_t held_out_edges = 0;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  // Open mode: held-out triples whose endpoints are both unseen.
  std::size_t both_unseen = 0;
};

struct Split {
  SplitSpec spec;
  std::vector<Triple> train;
  std::vector<Triple> validation;
  std::vector<Triple> test;
  std::vector<EntityId> train_entities;  // ascending
  std::vector<bool> in_train;            // indexed by entity id
  SplitCounts counts;

  std::string manifest_json() const;
};

// Closed mode keeps every entity and holds out a fraction of the edges.
// Open mode keeps a random fraction of the entities, holds out a fraction of
// the induced subgraph's edges (those go to validation), and splits every
// triple touching an unseen entity between test and validation.
// Pure function of (graph, spec).
Split make_split(const KnowledgeGraph& g, const SplitSpec& spec);

// Writes train.tsv / valid.tsv / test.tsv (entity and relation strings) and
// manifest.json into dir.
void write_split(const Split& split, const KnowledgeGraph& g, const std::filesystem::path& dir,
                 const std::string& extra_manifest_json = "");
Split read_split(const KnowledgeGraph& g, const std::filesystem::path& dir);

std::vector<Triple> read_triples(const KnowledgeGraph& g, const std::filesystem::path& path);

}  // namespace conmask
