#include "conmask/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "conmask/error.hpp"
#include "conmask/ops.hpp"

namespace conmask {

ModelParams::ModelParams(EmbeddingTable table, std::size_t conv_width, Rng& rng)
    : embeddings(std::move(table)), fcn(embeddings.dim(), conv_width, rng) {}

std::vector<nk::Parameter*> ModelParams::parameters() {
  std::vector<nk::Parameter*> out{&embeddings.vectors};
  for (nk::Parameter* p : fcn.parameters()) out.push_back(p);
  out.push_back(&combiner);
  return out;
}

ScoreGraph::ScoreGraph(nk::Graph& g, ModelParams& params, const Corpus& corpus,
                       const ModelOptions& options)
    : g_(g), params_(params), corpus_(corpus), options_(options), combiner_(g.parameter(params.combiner)) {}

void ScoreGraph::check_entity(EntityId e) const {
  if (e < 0 || static_cast<std::size_t>(e) >= corpus_.entity_name_ids.size()) {
    throw DataError("entity id " + std::to_string(e) + " is not in the corpus");
  }
  if (corpus_.entity_name_ids[static_cast<std::size_t>(e)].empty()) {
    throw DataError("entity id " + std::to_string(e) + " has no name tokens");
  }
}

nk::Var ScoreGraph::lookup(const std::vector<std::int32_t>& ids) {
  return nk::gather_rows(g_, params_.embeddings.vectors, ids);
}

nk::Var ScoreGraph::description_words(EntityId e) {
  auto it = desc_words_.find(e);
  if (it != desc_words_.end()) return it->second;
  check_entity(e);
  const auto& ids = corpus_.entity_desc_ids[static_cast<std::size_t>(e)];
  const nk::Var v =
      ids.empty() ? name_words(e) : lookup(ids);
  return desc_words_.emplace(e, v).first->second;
}

nk::Var ScoreGraph::name_words(EntityId e) {
  auto it = name_words_.find(e);
  if (it != name_words_.end()) return it->second;
  check_entity(e);
  return name_words_.emplace(e, lookup(corpus_.entity_name_ids[static_cast<std::size_t>(e)]))
      .first->second;
}

nk::Var ScoreGraph::relation_words(RelationId r) {
  auto it = rel_words_.find(r);
  if (it != rel_words_.end()) return it->second;
  if (r < 0 || static_cast<std::size_t>(r) >= corpus_.relation_name_ids.size() ||
      corpus_.relation_name_ids[static_cast<std::size_t>(r)].empty()) {
    throw DataError("relation id " + std::to_string(r) + " has no name tokens");
  }
  return rel_words_.emplace(r, lookup(corpus_.relation_name_ids[static_cast<std::size_t>(r)]))
      .first->second;
}

nk::Var ScoreGraph::name_avg(EntityId e) {
  auto it = name_avg_.find(e);
  if (it != name_avg_.end()) return it->second;
  const nk::Var w = name_words(e);
  return name_avg_.emplace(e, semantic_avg(g_, w, g_.value(w).rows())).first->second;
}

nk::Var ScoreGraph::description_avg(EntityId e) {
  auto it = desc_avg_.find(e);
  if (it != desc_avg_.end()) return it->second;
  const nk::Var w = description_words(e);
  return desc_avg_.emplace(e, semantic_avg(g_, w, g_.value(w).rows())).first->second;
}

nk::Var ScoreGraph::relation_avg(RelationId r) {
  auto it = rel_avg_.find(r);
  if (it != rel_avg_.end()) return it->second;
  const nk::Var w = relation_words(r);
  return rel_avg_.emplace(r, semantic_avg(g_, w, g_.value(w).rows())).first->second;
}

void ScoreGraph::request_fusion(EntityId e, RelationId r) {
  const std::pair key{e, r};
  if (fusions_.contains(key)) return;
  if (std::find(pending_.begin(), pending_.end(), key) != pending_.end()) return;
  pending_.push_back(key);
}

void ScoreGraph::fuse_pending() {
  if (pending_.empty()) return;
  std::vector<nk::Var> masked;
  masked.reserve(pending_.size());
  for (const auto& [e, r] : pending_) {
    masked.push_back(apply_mask(g_, description_words(e), relation_words(r), options_.mask).masked);
  }
  const auto fused = target_fusion(g_, params_.fcn, masked, options_.fusion);
  for (std::size_t i = 0; i < pending_.size(); ++i) fusions_.emplace(pending_[i], fused[i]);
  pending_.clear();
}

nk::Var ScoreGraph::fusion(EntityId e, RelationId r) {
  auto it = fusions_.find({e, r});
  if (it != fusions_.end()) return it->second;
  request_fusion(e, r);
  fuse_pending();
  return fusions_.at({e, r});
}

nk::Var ScoreGraph::features(const Triple& t) {
  const nk::Var fh = fusion(t.head, t.relation);
  const nk::Var ft = fusion(t.tail, t.relation);
  const nk::Var nh = name_avg(t.head), nt = name_avg(t.tail), nr = relation_avg(t.relation);
  const nk::Var dh = description_avg(t.head), dt = description_avg(t.tail);
  const std::array<nk::Var, kFeatureCount> theta{
      nk::cosine(g_, ft, nh), nk::cosine(g_, fh, ft), nk::cosine(g_, nr, nh),
      nk::cosine(g_, dh, dt), nk::cosine(g_, nr, nt), nk::cosine(g_, nh, nt),
      nk::cosine(g_, fh, nt)};
  return nk::stack(g_, theta);
}

nk::Var ScoreGraph::score(const Triple& t) {
  return nk::sum(g_, nk::mul(g_, features(t), combiner_));
}

InferenceScorer::InferenceScorer(ModelParams& params, const Corpus& corpus, const ModelOptions& options)
    : params_(params), corpus_(corpus), options_(options) {}

const nk::Tensor& InferenceScorer::cached_fusion(EntityId e, RelationId r) {
  auto it = fusions_.find({e, r});
  if (it != fusions_.end()) return it->second;
  nk::Graph g(nk::Mode::kInfer);
  ScoreGraph sg(g, params_, corpus_, options_);
  return fusions_.emplace(std::pair{e, r}, g.value(sg.fusion(e, r))).first->second;
}

const nk::Tensor& InferenceScorer::cached_name(EntityId e) {
  auto it = names_.find(e);
  if (it != names_.end()) return it->second;
  nk::Graph g(nk::Mode::kInfer);
  ScoreGraph sg(g, params_, corpus_, options_);
  return names_.emplace(e, g.value(sg.name_avg(e))).first->second;
}

const nk::Tensor& InferenceScorer::cached_desc(EntityId e) {
  auto it = descs_.find(e);
  if (it != descs_.end()) return it->second;
  nk::Graph g(nk::Mode::kInfer);
  ScoreGraph sg(g, params_, corpus_, options_);
  return descs_.emplace(e, g.value(sg.description_avg(e))).first->second;
}

const nk::Tensor& InferenceScorer::cached_relation(RelationId r) {
  auto it = relations_.find(r);
  if (it != relations_.end()) return it->second;
  nk::Graph g(nk::Mode::kInfer);
  ScoreGraph sg(g, params_, corpus_, options_);
  return relations_.emplace(r, g.value(sg.relation_avg(r))).first->second;
}

std::array<double, kFeatureCount> InferenceScorer::features(const Triple& t) {
  // Same ops as ScoreGraph::features over cached values, so both paths agree
  // bit for bit.
  nk::Graph g(nk::Mode::kInfer);
  const nk::Var fh = g.constant(cached_fusion(t.head, t.relation));
  const nk::Var ft = g.constant(cached_fusion(t.tail, t.relation));
  const nk::Var nh = g.constant(cached_name(t.head)), nt = g.constant(cached_name(t.tail));
  const nk::Var nr = g.constant(cached_relation(t.relation));
  const nk::Var dh = g.constant(cached_desc(t.head)), dt = g.constant(cached_desc(t.tail));
  const std::array<nk::Var, kFeatureCount> theta{
      nk::cosine(g, ft, nh), nk::cosine(g, fh, ft), nk::cosine(g, nr, nh), nk::cosine(g, dh, dt),
      nk::cosine(g, nr, nt), nk::cosine(g, nh, nt), nk::cosine(g, fh, nt)};
  std::array<double, kFeatureCount> out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = g.value(theta[i])[0];
  return out;
}

double InferenceScorer::score(const Triple& t) {
  nk::Graph g(nk::Mode::kInfer);
  const auto theta = features(t);
  const nk::Var f = g.constant(nk::Tensor({1, kFeatureCount}, std::vector<double>(theta.begin(), theta.end())));
  return g.value(nk::sum(g, nk::mul(g, f, g.constant(params_.combiner.value))))[0];
}

std::vector<double> InferenceScorer::score_candidates(const Triple& query, Side side,
                                                      std::span<const EntityId> candidates) {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (EntityId c : candidates) out.push_back(score(substitute(query, side, c)));
  return out;
}

double softmax_score(std::span<const double> scores, std::size_t true_index) {
  if (scores.empty()) throw UsageError("softmax_score: empty candidate set");
  if (true_index >= scores.size()) throw UsageError("softmax_score: true index out of range");
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  return std::exp(scores[true_index] - mx) / z;
}

double softmax_score(InferenceScorer& scorer, const Triple& t, Side side,
                     std::span<const EntityId> candidates) {
  if (candidates.empty()) throw UsageError("softmax_score: empty candidate set");
  const EntityId truth = target_of(t, side);
  const auto it = std::find(candidates.begin(), candidates.end(), truth);
  if (it == candidates.end()) throw UsageError("softmax_score: true entity is not in the pool");
  const auto scores = scorer.score_candidates(t, side, candidates);
  return softmax_score(scores, static_cast<std::size_t>(it - candidates.begin()));
}

nk::Var listwise_loss(ScoreGraph& sg, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw UsageError("listwise_loss: empty batch");
  nk::Graph& g = sg.graph();
  for (const auto& ex : batch) {
    const Triple& t = ex.triple;
    sg.request_fusion(ex.targets.side == Side::kHead ? t.tail : t.head, t.relation);
    for (const auto* list : {&ex.targets.positives, &ex.targets.negatives})
      for (EntityId c : *list) sg.request_fusion(c, t.relation);
  }
  sg.fuse_pending();

  std::vector<nk::Var> losses;
  losses.reserve(batch.size());
  for (const auto& ex : batch) {
    const auto& tg = ex.targets;
    if (tg.positives.empty()) throw UsageError("listwise_loss: example without positives");
    std::vector<nk::Var> scores;
    for (const auto* list : {&tg.positives, &tg.negatives})
      for (EntityId c : *list) scores.push_back(sg.score(substitute(ex.triple, tg.side, c)));
    const nk::Var log_s = nk::log_softmax_row(g, nk::stack(g, scores));
    std::vector<nk::Var> picks;
    for (std::size_t i = 0; i < tg.positives.size(); ++i) picks.push_back(nk::pick(g, log_s, i));
    const nk::Var total = picks.size() == 1 ? picks[0] : nk::sum(g, nk::stack(g, picks));
    losses.push_back(nk::scale(g, total, -1.0 / static_cast<double>(tg.positives.size())));
  }
  const nk::Var all = losses.size() == 1 ? losses[0] : nk::sum(g, nk::stack(g, losses));
  return nk::scale(g, all, 1.0 / static_cast<double>(batch.size()));
}

}  // namespace conmask
