#include "conmask/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "conmask/error.hpp"
#include "conmask/ops.hpp"
#include "json.hpp"

namespace conmask {

namespace {

nk::Tensor unit(nk::Tensor v) {
  double n = 0.0;
  for (double x : v.data()) n += x * x;
  if (n == 0.0) return v;
  n = std::sqrt(n);
  for (double& x : v.data()) x /= n;
  return v;
}

}  // namespace

CandidatePool target_filter(const Triple& query, Side side, const TripleIndex& train) {
  CandidatePool pool;
  const auto seen = train.relation_targets(query.relation, side);
  if (seen.empty()) return pool;
  pool.candidates.assign(seen.begin(), seen.end());
  const EntityId truth = target_of(query, side);
  if (!std::binary_search(seen.begin(), seen.end(), truth)) {
    pool.candidates.push_back(truth);
    pool.unfilterable = true;
  }
  return pool;
}

std::size_t pessimistic_rank(std::span<const double> scores, std::size_t true_index,
                             const std::vector<bool>& excluded) {
  const double s = scores[true_index];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == true_index || (!excluded.empty() && excluded[i])) continue;
    if (scores[i] >= s || std::isnan(scores[i])) ++rank;
  }
  return rank;
}

RankSummary summarize(std::span<const QueryResult> rows, Side side) {
  RankSummary out;
  double rank_sum = 0.0, rr_sum = 0.0;
  std::size_t h1 = 0, h10 = 0;
  for (const QueryResult& q : rows) {
    if (q.side != side) continue;
    ++out.queries;
    if (q.unfilterable) ++out.unfilterable;
    rank_sum += static_cast<double>(q.rank);
    rr_sum += 1.0 / static_cast<double>(q.rank);
    if (q.rank <= 1) ++h1;
    if (q.rank <= 10) ++h10;
  }
  if (out.queries > 0) {
    const double n = static_cast<double>(out.queries);
    out.mr = rank_sum / n;
    out.mrr = rr_sum / n;
    out.hits1 = static_cast<double>(h1) / n;
    out.hits10 = static_cast<double>(h10) / n;
  }
  return out;
}

RankingReport rank_queries(std::span<const Triple> test, const BatchScorer& scorer,
                           const TripleIndex& train, const RankingOptions& options,
                           const TripleIndex* known) {
  if (options.filtered && !known) throw UsageError("filtered ranking needs the set of known triples");
  RankingReport report;
  report.filtered = options.filtered;
  std::size_t skipped[2] = {0, 0}, failed[2] = {0, 0};
  std::vector<Side> sides;
  if (options.predict_heads) sides.push_back(Side::kHead);
  if (options.predict_tails) sides.push_back(Side::kTail);

  for (std::size_t qi = 0; qi < test.size(); ++qi) {
    const Triple& q = test[qi];
    for (Side side : sides) {
      const int s = side == Side::kHead ? 0 : 1;
      CandidatePool pool = target_filter(q, side, train);
      if (pool.candidates.empty()) {
        ++skipped[s];
        continue;
      }
      std::vector<double> scores;
      try {
        scores = scorer(q, side, pool.candidates);
      } catch (const Error&) {
        ++failed[s];
        continue;
      }
      if (scores.size() != pool.candidates.size()) {
        throw Error("scorer returned " + std::to_string(scores.size()) + " scores for " +
                    std::to_string(pool.candidates.size()) + " candidates");
      }
      const EntityId truth = target_of(q, side);
      const auto true_index = static_cast<std::size_t>(
          std::find(pool.candidates.begin(), pool.candidates.end(), truth) - pool.candidates.begin());
      std::vector<bool> excluded;
      if (options.filtered) {
        excluded.resize(pool.candidates.size(), false);
        for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
          excluded[i] = i != true_index && known->contains(substitute(q, side, pool.candidates[i]));
        }
      }
      QueryResult row;
      row.query_id = qi;
      row.side = side;
      row.rank = pessimistic_rank(scores, true_index, excluded);
      row.pool_size = pool.candidates.size();
      row.unfilterable = pool.unfilterable;
      if (options.keep_scores) {
        row.candidates = std::move(pool.candidates);
        row.scores = std::move(scores);
        row.excluded = std::move(excluded);
      }
      report.rows.push_back(std::move(row));
    }
  }
  report.head = summarize(report.rows, Side::kHead);
  report.tail = summarize(report.rows, Side::kTail);
  report.head.skipped = skipped[0];
  report.tail.skipped = skipped[1];
  report.head.failed = failed[0];
  report.tail.failed = failed[1];
  return report;
}

double RankingReport::mean_mrr() const {
  double total = 0.0;
  int n = 0;
  for (const RankSummary* s : {&head, &tail}) {
    if (s->queries == 0) continue;
    total += s->mrr;
    ++n;
  }
  return n == 0 ? 0.0 : total / n;
}

std::string RankingReport::to_json() const {
  nlohmann::ordered_json j;
  j["protocol"] = filtered ? "filtered" : "raw";
  for (Side side : {Side::kHead, Side::kTail}) {
    const RankSummary& s = summary(side);
    j[to_string(side)] = {{"queries", s.queries},   {"skipped", s.skipped},
                          {"failed", s.failed},     {"unfilterable", s.unfilterable},
                          {"mr", s.mr},             {"hits1", s.hits1},
                          {"hits10", s.hits10},     {"mrr", s.mrr}};
  }
  j["mean_mrr"] = mean_mrr();
  return j.dump(2);
}

std::string RankingReport::rows_csv() const {
  std::ostringstream out;
  out << "query_id,direction,rank,pool_size,flags\n";
  for (const QueryResult& q : rows) {
    out << q.query_id << ',' << to_string(q.side) << ',' << q.rank << ',' << q.pool_size << ','
        << (q.unfilterable ? "unfilterable" : "") << '\n';
  }
  return out.str();
}

BatchScorer random_scorer(std::uint64_t seed) {
  return [seed](const Triple& q, Side side, std::span<const EntityId> candidates) {
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(q.head)) << 32) ^
                              static_cast<std::uint32_t>(q.tail);
    Rng rng(derive_seed(seed, key, (static_cast<std::uint64_t>(q.relation) << 1) |
                                       (side == Side::kHead ? 0u : 1u)));
    std::vector<double> scores(candidates.size());
    for (double& s : scores) s = uniform01(rng);
    return scores;
  };
}

SemanticAverageScorer::SemanticAverageScorer(const EmbeddingTable& table, const Corpus& corpus)
    : table_(table), corpus_(corpus) {}

nk::Tensor SemanticAverageScorer::average(const std::vector<std::int32_t>& ids) const {
  const std::size_t k = table_.dim();
  nk::Tensor out({1, k});
  if (ids.empty()) return out;
  for (std::int32_t id : ids) {
    if (id < 0) continue;
    const auto row = table_.vectors.value.row_span(static_cast<std::size_t>(id));
    for (std::size_t c = 0; c < k; ++c) out[c] += row[c];
  }
  for (double& v : out.data()) v /= static_cast<double>(ids.size());
  return out;
}

std::vector<double> SemanticAverageScorer::operator()(const Triple& query, Side side,
                                                      std::span<const EntityId> candidates) const {
  const EntityId known = side == Side::kHead ? query.tail : query.head;
  // Both averages are scaled to unit length before summing so a long
  // description does not vanish next to a one-word relation name.
  nk::Tensor q = unit(average(corpus_.entity_desc_ids.at(static_cast<std::size_t>(known))));
  q.add_inplace(unit(average(corpus_.relation_name_ids.at(static_cast<std::size_t>(query.relation)))));
  nk::Graph g(nk::Mode::kInfer);
  const nk::Var qv = g.constant(q);
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (EntityId c : candidates) {
    const nk::Var cv = g.constant(average(corpus_.entity_name_ids.at(static_cast<std::size_t>(c))));
    scores.push_back(g.value(nk::cosine(g, qv, cv))[0]);
  }
  return scores;
}

BatchScorer conmask_scorer(InferenceScorer& scorer) {
  return [&scorer](const Triple& q, Side side, std::span<const EntityId> candidates) {
    return scorer.score_candidates(q, side, candidates);
  };
}

}  // namespace conmask
