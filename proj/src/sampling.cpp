#include "conmask/sampling.hpp"

#include <algorithm>
#include <unordered_set>

namespace conmask {

namespace {

void sort_unique(std::vector<EntityId>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

template <typename Map, typename Key>
std::span<const EntityId> find_list(const Map& m, const Key& k) {
  auto it = m.find(k);
  if (it == m.end()) return {};
  return it->second;
}

// k items of `pool` without replacement, in draw order.
std::vector<EntityId> draw(std::vector<EntityId> pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

TripleIndex::TripleIndex(std::span<const Triple> triples) {
  for (const Triple& t : triples) {
    if (!set_.insert(t).second) continue;
    heads_[{t.relation, t.tail}].push_back(t.head);
    tails_[{t.head, t.relation}].push_back(t.tail);
    rel_heads_[t.relation].push_back(t.head);
    rel_tails_[t.relation].push_back(t.tail);
  }
  for (auto& [k, v] : heads_) sort_unique(v);
  for (auto& [k, v] : tails_) sort_unique(v);
  for (auto& [k, v] : rel_heads_) sort_unique(v);
  for (auto& [k, v] : rel_tails_) sort_unique(v);
}

std::span<const EntityId> TripleIndex::heads(RelationId r, EntityId tail) const {
  return find_list(heads_, std::pair{r, tail});
}
std::span<const EntityId> TripleIndex::tails(EntityId head, RelationId r) const {
  return find_list(tails_, std::pair{head, r});
}
std::span<const EntityId> TripleIndex::relation_heads(RelationId r) const {
  return find_list(rel_heads_, r);
}
std::span<const EntityId> TripleIndex::relation_tails(RelationId r) const {
  return find_list(rel_tails_, r);
}
std::span<const EntityId> TripleIndex::targets(const Triple& t, Side side) const {
  return side == Side::kHead ? heads(t.relation, t.tail) : tails(t.head, t.relation);
}
std::span<const EntityId> TripleIndex::relation_targets(RelationId r, Side side) const {
  return side == Side::kHead ? relation_heads(r) : relation_tails(r);
}

SampledTargets sample_targets(const Triple& t, const TripleIndex& index,
                              std::span<const EntityId> entities, const SamplingOptions& options,
                              Rng& rng) {
  SampledTargets out;
  out.p_c = uniform01(rng);
  out.side = out.p_c > 0.5 ? Side::kHead : Side::kTail;

  const auto known = index.targets(t, out.side);
  std::vector<EntityId> truth(known.begin(), known.end());
  const EntityId own = target_of(t, out.side);
  if (!std::binary_search(truth.begin(), truth.end(), own)) {
    truth.insert(std::upper_bound(truth.begin(), truth.end(), own), own);
  }
  out.positives = draw(truth, std::max<std::size_t>(options.positives, 1), rng);

  const std::size_t want = options.negatives;
  if (want == 0) return out;
  auto is_true = [&](EntityId e) { return std::binary_search(truth.begin(), truth.end(), e); };

  // Rejection sampling is cheap when negatives are plentiful, which is the
  // usual case; fall back to enumerating the complement otherwise.
  std::unordered_set<EntityId> taken;
  const std::size_t max_attempts = 8 * want + 32;
  if (entities.size() >= 4 * (truth.size() + want)) {
    for (std::size_t attempt = 0; attempt < max_attempts && out.negatives.size() < want; ++attempt) {
      const EntityId e = entities[static_cast<std::size_t>(uniform_index(rng, entities.size()))];
      if (is_true(e) || !taken.insert(e).second) continue;
      out.negatives.push_back(e);
    }
    if (out.negatives.size() == want) return out;
  }
  std::vector<EntityId> rest;
  for (EntityId e : entities) {
    if (!is_true(e) && !taken.contains(e)) rest.push_back(e);
  }
  sort_unique(rest);
  auto more = draw(std::move(rest), want - out.negatives.size(), rng);
  out.negatives.insert(out.negatives.end(), more.begin(), more.end());
  return out;
}

}  // namespace conmask
