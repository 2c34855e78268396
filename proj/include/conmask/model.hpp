#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conmask/embeddings.hpp"
#include "conmask/encoder.hpp"
#include "conmask/knowledge_graph.hpp"
#include "conmask/masking.hpp"
#include "conmask/sampling.hpp"

namespace conmask {

inline constexpr std::size_t kFeatureCount = 7;

struct ModelOptions {
  MaskOptions mask;
  FusionOptions fusion;
};

// Everything that is trained: word vectors, the fusion network and the
// feature combination weights w1..w7 (initialised to 1).
struct ModelParams {
  EmbeddingTable embeddings;
  FcnParams fcn;
  nk::Parameter combiner{"combiner", nk::Tensor({1, kFeatureCount}, 1.0)};

  ModelParams() = default;
  ModelParams(EmbeddingTable table, std::size_t conv_width, Rng& rng);

  std::size_t dim() const { return embeddings.dim(); }
  // Word vectors first, then the fusion network, then the combiner.
  std::vector<nk::Parameter*> parameters();
};

// Builds ConMask scores for many triples inside one graph, sharing every
// lookup, average and fusion. Fusions can be requested up front and run in
// one batch, which is what pools batch-norm statistics during training.
class ScoreGraph {
 public:
  ScoreGraph(nk::Graph& g, ModelParams& params, const Corpus& corpus, const ModelOptions& options);

  void request_fusion(EntityId e, RelationId r);
  // Runs every pending fusion request as one batch.
  void fuse_pending();

  nk::Var description_words(EntityId e);
  nk::Var name_words(EntityId e);
  nk::Var relation_words(RelationId r);
  nk::Var name_avg(EntityId e);
  nk::Var description_avg(EntityId e);
  nk::Var relation_avg(RelationId r);
  nk::Var fusion(EntityId e, RelationId r);

  // theta_1..theta_7 as [1 x 7]:
  //   1 cos(F_t, n_h)   2 cos(F_h, F_t)   3 cos(n_r, n_h)   4 cos(d_h, d_t)
  //   5 cos(n_r, n_t)   6 cos(n_h, n_t)   7 cos(F_h, n_t)
  // where F_x is the fusion of x's masked description, n_x the name average
  // and d_x the description average.
  nk::Var features(const Triple& t);
  nk::Var score(const Triple& t);

  nk::Graph& graph() { return g_; }

 private:
  nk::Var lookup(const std::vector<std::int32_t>& ids);
  void check_entity(EntityId e) const;

  nk::Graph& g_;
  ModelParams& params_;
  const Corpus& corpus_;
  ModelOptions options_;
  nk::Var combiner_;
  std::unordered_map<EntityId, nk::Var> desc_words_, name_words_, name_avg_, desc_avg_;
  std::unordered_map<RelationId, nk::Var> rel_words_, rel_avg_;
  std::map<std::pair<EntityId, RelationId>, nk::Var> fusions_;
  std::vector<std::pair<EntityId, RelationId>> pending_;
};

// Read-only scoring in inference mode with per-entity caches. Fusion
// outputs are cached per (entity, relation).
class InferenceScorer {
 public:
  InferenceScorer(ModelParams& params, const Corpus& corpus, const ModelOptions& options);

  double score(const Triple& t);
  std::array<double, kFeatureCount> features(const Triple& t);
  // Scores of `query` with each candidate substituted on `side`.
  std::vector<double> score_candidates(const Triple& query, Side side,
                                       std::span<const EntityId> candidates);

 private:
  const nk::Tensor& cached_fusion(EntityId e, RelationId r);
  const nk::Tensor& cached_name(EntityId e);
  const nk::Tensor& cached_desc(EntityId e);
  const nk::Tensor& cached_relation(RelationId r);

  ModelParams& params_;
  const Corpus& corpus_;
  ModelOptions options_;
  std::map<std::pair<EntityId, RelationId>, nk::Tensor> fusions_;
  std::unordered_map<EntityId, nk::Tensor> names_, descs_;
  std::unordered_map<RelationId, nk::Tensor> relations_;
};

// exp(s[true]) / sum exp(s), stabilised by max subtraction.
double softmax_score(std::span<const double> scores, std::size_t true_index);
// S(h, r, t) over a candidate pool on `side`; the triple's own entity must be
// in the pool.
double softmax_score(InferenceScorer& scorer, const Triple& t, Side side,
                     std::span<const EntityId> candidates);

struct TrainingExample {
  Triple triple;
  SampledTargets targets;
};

// Partial list-wise loss: per example -(1/|E+|) sum over positives of
// log S over the pool E+ followed by E-, averaged over the batch.
nk::Var listwise_loss(ScoreGraph& sg, std::span<const TrainingExample> batch);

}  // namespace conmask
