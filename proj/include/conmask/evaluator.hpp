#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "conmask/embeddings.hpp"
#include "conmask/knowledge_graph.hpp"
#include "conmask/model.hpp"
#include "conmask/sampling.hpp"

namespace conmask {

struct CandidatePool {
  std::vector<EntityId> candidates;
  // The true entity was never seen with the relation in train and was
  // appended so that its rank is defined.
  bool unfilterable = false;
};

// Candidates for predicting `side` of `query`: entities seen on that side
// of the query relation in train. Empty when the relation is unseen.
CandidatePool target_filter(const Triple& query, Side side, const TripleIndex& train);

// Scores for `query` with each candidate substituted on `side`.
using BatchScorer =
    std::function<std::vector<double>(const Triple& query, Side side, std::span<const EntityId>)>;

struct QueryResult {
  std::size_t query_id = 0;
  Side side = Side::kTail;
  std::size_t rank = 0;
  std::size_t pool_size = 0;
  bool unfilterable = false;
  // Filled when RankingOptions::keep_scores is set.
  std::vector<EntityId> candidates;
  std::vector<double> scores;
  std::vector<bool> excluded;  // filtered protocol only
};

struct RankSummary {
  std::size_t queries = 0;
  std::size_t skipped = 0;  // relation unseen in train
  std::size_t failed = 0;   // scorer raised an error
  std::size_t unfilterable = 0;
  double mr = 0.0;
  double hits1 = 0.0;
  double hits10 = 0.0;
  double mrr = 0.0;
};

struct RankingReport {
  std::vector<QueryResult> rows;
  RankSummary head;
  RankSummary tail;
  bool filtered = false;

  const RankSummary& summary(Side side) const { return side == Side::kHead ? head : tail; }
  // Mean of the head and tail MRR over the directions that have queries.
  double mean_mrr() const;
  std::string to_json() const;
  // query_id,direction,rank,pool_size,flags
  std::string rows_csv() const;
};

struct RankingOptions {
  bool filtered = false;
  bool keep_scores = false;
  bool predict_heads = true;
  bool predict_tails = true;
};

// 1 + number of other candidates scoring >= the true one (ties count
// against the true entity). Candidates flagged in `excluded` are ignored.
std::size_t pessimistic_rank(std::span<const double> scores, std::size_t true_index,
                             const std::vector<bool>& excluded = {});

// Aggregates over rows of one direction in row order.
RankSummary summarize(std::span<const QueryResult> rows, Side side);

// Ranks every test triple in both directions. `known` holds every true
// triple for the filtered protocol and may be null otherwise.
RankingReport rank_queries(std::span<const Triple> test, const BatchScorer& scorer,
                           const TripleIndex& train, const RankingOptions& options = {},
                           const TripleIndex* known = nullptr);

// Uniform random scores, deterministic per (seed, query, side).
BatchScorer random_scorer(std::uint64_t seed);

// cos(u(avg(description of the known entity)) + u(avg(relation name)),
//     avg(candidate name)) with u(x) = x / |x|.
class SemanticAverageScorer {
 public:
  SemanticAverageScorer(const EmbeddingTable& table, const Corpus& corpus);
  std::vector<double> operator()(const Triple& query, Side side, std::span<const EntityId> candidates) const;

 private:
  nk::Tensor average(const std::vector<std::int32_t>& ids) const;

  const EmbeddingTable& table_;
  const Corpus& corpus_;
};

BatchScorer conmask_scorer(InferenceScorer& scorer);

}  // namespace conmask
