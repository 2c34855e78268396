#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "conmask/knowledge_graph.hpp"
#include "conmask/random.hpp"

namespace conmask {

// Lookup structure over a triple set: true heads for (r, t), true tails for
// (h, r), and every head / tail seen with a relation. All lists are sorted.
class TripleIndex {
 public:
  TripleIndex() = default;
  explicit TripleIndex(std::span<const Triple> triples);

  bool contains(const Triple& t) const { return set_.contains(t); }
  std::span<const EntityId> heads(RelationId r, EntityId tail) const;
  std::span<const EntityId> tails(EntityId head, RelationId r) const;
  std::span<const EntityId> relation_heads(RelationId r) const;
  std::span<const EntityId> relation_tails(RelationId r) const;
  // Entities on the `side` slot of true triples sharing the other two slots.
  std::span<const EntityId> targets(const Triple& t, Side side) const;
  std::span<const EntityId> relation_targets(RelationId r, Side side) const;
  std::size_t size() const { return set_.size(); }

 private:
  TripleSet set_;
  std::map<std::pair<RelationId, EntityId>, std::vector<EntityId>> heads_;
  std::map<std::pair<EntityId, RelationId>, std::vector<EntityId>> tails_;
  std::map<RelationId, std::vector<EntityId>> rel_heads_;
  std::map<RelationId, std::vector<EntityId>> rel_tails_;
};

struct SamplingOptions {
  std::size_t positives = 1;  // |E+|
  std::size_t negatives = 4;  // |E-|
};

struct SampledTargets {
  Side side = Side::kTail;
  double p_c = 0.0;
  std::vector<EntityId> positives;
  std::vector<EntityId> negatives;
};

// Draws p_c ~ U[0, 1); p_c > 0.5 corrupts the head, otherwise the tail.
// Positives are drawn without replacement from the true entities of the
// corrupted slot (the triple's own entity always qualifies), negatives
// without replacement from `entities` minus every true entity. When fewer
// entities are available than requested, all of them are used.
SampledTargets sample_targets(const Triple& t, const TripleIndex& index,
                              std::span<const EntityId> entities, const SamplingOptions& options,
                              Rng& rng);

}  // namespace conmask
