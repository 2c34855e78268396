#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace conmask {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(t.head);
    h = h * 0x100000001b3ULL ^ static_cast<std::uint32_t>(t.relation);
    h = h * 0x100000001b3ULL ^ static_cast<std::uint32_t>(t.tail);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

// Which slot of a triple is being predicted (or corrupted).
enum class Side { kHead, kTail };

inline const char* to_string(Side s) { return s == Side::kHead ? "head" : "tail"; }

inline Triple substitute(Triple t, Side side, EntityId e) {
  (side == Side::kHead ? t.head : t.tail) = e;
  return t;
}

inline EntityId target_of(const Triple& t, Side side) { return side == Side::kHead ? t.head : t.tail; }

// Bidirectional string <-> dense id map, ids assigned in insertion order.
class Interner {
 public:
  std::int32_t intern(std::string_view key);
  std::optional<std::int32_t> find(std::string_view key) const;
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

struct KnowledgeGraph {
  Interner entities;
  Interner relations;
  std::vector<Triple> triples;  // deduplicated, file order
  std::vector<std::vector<std::string>> entity_names;         // never empty
  std::vector<std::vector<std::string>> entity_descriptions;  // may be empty
  std::vector<std::vector<std::string>> relation_names;       // never empty

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
};

// Reads the three TSV inputs:
//   triples       head<TAB>relation<TAB>tail
//   names         id<TAB>name text         (entities and relations)
//   descriptions  entity<TAB>description text
// Ids are assigned in first-seen order over the triples file. An entity
// without a name row is a DataError; a relation without one falls back to
// its tokenized id. Descriptions are optional per entity.
KnowledgeGraph load_graph(const std::filesystem::path& triples,
                          const std::filesystem::path& names,
                          const std::filesystem::path& descriptions);

// Token counts over every name and description; used for the optional
// frequency cutoff on the vocabulary.
std::unordered_map<std::string, std::size_t> word_counts(const KnowledgeGraph& g);

// Words that appear more than `min_count` times (min_count 0 keeps all).
std::unordered_set<std::string> corpus_vocabulary(const KnowledgeGraph& g, std::size_t min_count = 0);

}  // namespace conmask
