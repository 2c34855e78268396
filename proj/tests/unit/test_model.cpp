#include <cmath>
#include <set>
#include <vector>

#include "conmask/error.hpp"
#include "conmask/grad_check.hpp"
#include "conmask/model.hpp"
#include "conmask/ops.hpp"
#include "doctest.h"
#include "toy_kg.hpp"

using namespace conmask;
using nk::Tensor;

namespace {

struct Fixture {
  testing::ToyKg kg;
  Corpus corpus;
  Rng rng{5};
  ModelParams params;
  ModelOptions options;

  explicit Fixture(std::size_t dim = 8) : kg(testing::make_toy_kg(5, 2, dim, 3)) {
    corpus = Corpus::build(kg.graph, kg.table);
    params = ModelParams(kg.table, 3, rng);
    // Give batch norm its moving statistics.
    nk::Graph g(nk::Mode::kTrain, 1);
    ScoreGraph sg(g, params, corpus, options);
    for (EntityId e = 0; e < 5; ++e) sg.request_fusion(e, 0);
    sg.fuse_pending();
  }
};

Tensor mean_rows(const Tensor& table, const std::vector<std::int32_t>& ids) {
  Tensor out({1, table.cols()});
  for (std::int32_t id : ids)
    for (std::size_t c = 0; c < table.cols(); ++c) out[c] += table(static_cast<std::size_t>(id), c) / static_cast<double>(ids.size());
  return out;
}

Tensor rows_of(const Tensor& table, const std::vector<std::int32_t>& ids) {
  Tensor out({ids.size(), table.cols()});
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t c = 0; c < table.cols(); ++c) out(i, c) = table(static_cast<std::size_t>(ids[i]), c);
  return out;
}

double cos_loop(const Tensor& a, const Tensor& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return na == 0 || nb == 0 ? 0.0 : d / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("feature trace against a hand-built pipeline") {
  Fixture f;
  const Tensor& table = f.params.embeddings.vectors.value;
  auto fuse = [&](EntityId e, RelationId r) {
    const auto mc = apply_mask(rows_of(table, f.corpus.entity_desc_ids[e]), rows_of(table, f.corpus.relation_name_ids[r]),
                               f.options.mask);
    nk::Graph g(nk::Mode::kInfer);
    return Tensor(g.value(target_fusion(g, f.params.fcn, g.constant(mc.masked), f.options.fusion)));
  };
  InferenceScorer scorer(f.params, f.corpus, f.options);
  for (const Triple& t : f.kg.graph.triples) {
    const Tensor fh = fuse(t.head, t.relation), ft = fuse(t.tail, t.relation);
    const Tensor nh = mean_rows(table, f.corpus.entity_name_ids[t.head]);
    const Tensor nt = mean_rows(table, f.corpus.entity_name_ids[t.tail]);
    const Tensor nr = mean_rows(table, f.corpus.relation_name_ids[t.relation]);
    const Tensor dh = mean_rows(table, f.corpus.entity_desc_ids[t.head]);
    const Tensor dt = mean_rows(table, f.corpus.entity_desc_ids[t.tail]);
    const double expect[kFeatureCount] = {cos_loop(ft, nh), cos_loop(fh, ft), cos_loop(nr, nh), cos_loop(dh, dt),
                                          cos_loop(nr, nt), cos_loop(nh, nt), cos_loop(fh, nt)};
    const auto got = scorer.features(t);
    double sum = 0;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
      sum += expect[i];
    }
    CHECK(scorer.score(t) == doctest::Approx(sum).epsilon(1e-12));

    nk::Graph g(nk::Mode::kInfer);
    ScoreGraph sg(g, f.params, f.corpus, f.options);
    const Tensor graph_features = g.value(sg.features(t));
    for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(graph_features[i] == got[i]);
  }
}

TEST_CASE("combiner weights select features") {
  Fixture f;
  const Triple t = f.kg.graph.triples[0];
  InferenceScorer probe(f.params, f.corpus, f.options);
  const auto theta = probe.features(t);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    f.params.combiner.value.fill(0.0);
    f.params.combiner.value[i] = 2.0;
    InferenceScorer s(f.params, f.corpus, f.options);
    CHECK(s.score(t) == doctest::Approx(2.0 * theta[i]).epsilon(1e-12));
  }
  f.params.combiner.value.fill(0.0);
  InferenceScorer zero(f.params, f.corpus, f.options);
  CHECK(zero.score(t) == 0.0);
}

TEST_CASE("symmetric features survive swapping head and tail") {
  Fixture f;
  InferenceScorer s(f.params, f.corpus, f.options);
  for (const Triple& t : f.kg.graph.triples) {
    const auto a = s.features(t);
    const auto b = s.features(Triple{t.tail, t.relation, t.head});
    CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-14));  // cos(F_h, F_t)
    CHECK(a[3] == doctest::Approx(b[3]).epsilon(1e-14));  // cos(d_h, d_t)
    CHECK(a[5] == doctest::Approx(b[5]).epsilon(1e-14));  // cos(n_h, n_t)
    CHECK(a[2] == doctest::Approx(b[4]).epsilon(1e-14));  // n_r vs head / tail
  }
}

TEST_CASE("unknown entities are data errors") {
  Fixture f;
  InferenceScorer s(f.params, f.corpus, f.options);
  CHECK_THROWS_AS(s.score(Triple{0, 0, 17}), DataError);
}

TEST_CASE("softmax_score") {
  const std::vector<double> flat(4, 0.3);
  CHECK(softmax_score(flat, 2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(softmax_score(std::vector<double>{5.0}, 0) == 1.0);
  CHECK(softmax_score(std::vector<double>{1000.0, 0.0}, 0) == doctest::Approx(1.0));
  CHECK(softmax_score(std::vector<double>{0.0, std::log(3.0)}, 1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(softmax_score(std::vector<double>{}, 0), UsageError);
  CHECK_THROWS_AS(softmax_score(flat, 4), UsageError);

  Fixture f;
  InferenceScorer s(f.params, f.corpus, f.options);
  const Triple t = f.kg.graph.triples[0];
  const std::vector<EntityId> pool{0, 1, 2, 3, 4};
  double total = 0;
  for (EntityId e : pool) total += softmax_score(s, substitute(t, Side::kTail, e), Side::kTail, pool);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<EntityId> without{(t.tail + 1) % 5};
  CHECK_THROWS_AS(softmax_score(s, t, Side::kTail, without), UsageError);
}

TEST_CASE("listwise loss values") {
  Fixture f;
  const Triple t = f.kg.graph.triples[0];
  SampledTargets only_positive{Side::kTail, 0.1, {t.tail}, {}};
  SUBCASE("a lone positive costs nothing") {
    nk::Graph g(nk::Mode::kTrain, 2);
    ScoreGraph sg(g, f.params, f.corpus, f.options);
    const std::vector<TrainingExample> batch{{t, only_positive}};
    CHECK(g.value(listwise_loss(sg, batch))[0] == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("equal scores cost log of the pool size") {
    f.params.combiner.value.fill(0.0);
    SampledTargets tg{Side::kHead, 0.9, {t.head, (t.head + 1) % 5}, {2, 3, 4}};
    nk::Graph g(nk::Mode::kTrain, 2);
    ScoreGraph sg(g, f.params, f.corpus, f.options);
    const std::vector<TrainingExample> batch{{t, tg}, {t, only_positive}};
    CHECK(g.value(listwise_loss(sg, batch))[0] == doctest::Approx(std::log(5.0) / 2.0).epsilon(1e-14));
  }
  SUBCASE("empty inputs") {
    nk::Graph g(nk::Mode::kTrain);
    ScoreGraph sg(g, f.params, f.corpus, f.options);
    CHECK_THROWS_AS(listwise_loss(sg, std::span<const TrainingExample>{}), UsageError);
    const std::vector<TrainingExample> bad{{t, SampledTargets{}}};
    CHECK_THROWS_AS(listwise_loss(sg, bad), UsageError);
  }
}

TEST_CASE("full loss gradient on the toy graph") {
  Fixture f(8);
  const TripleIndex index(f.kg.graph.triples);
  std::vector<EntityId> entities{0, 1, 2, 3, 4};
  Rng rng(9);
  std::vector<TrainingExample> batch;
  for (const Triple& t : f.kg.graph.triples) batch.push_back({t, sample_targets(t, index, entities, {1, 2}, rng)});
  auto ps = f.params.parameters();
  auto build = [&](nk::Graph& g) {
    ScoreGraph sg(g, f.params, f.corpus, f.options);
    return listwise_loss(sg, batch);
  };
  const auto r = nk::grad_check(build, ps, 1e-5, nk::Mode::kTrain, 4);
  INFO("worst " << r.worst_parameter << "[" << r.worst_index << "] a=" << r.analytic << " n=" << r.numeric);
  CHECK(r.max_relative_error < 1e-4);
  CHECK(r.coordinates > 1000);
}

TEST_CASE("sampling") {
  // r0: 0->1, 0->2, 3->1; r1: 2->4
  const std::vector<Triple> triples{{0, 0, 1}, {0, 0, 2}, {3, 0, 1}, {2, 1, 4}};
  const TripleIndex index(triples);
  const std::vector<EntityId> entities{0, 1, 2, 3, 4, 5, 6};
  CHECK(index.tails(0, 0).size() == 2);
  CHECK(index.heads(0, 1).size() == 2);
  CHECK(index.relation_tails(0).size() == 2);

  SUBCASE("side follows p_c and pools respect the truth") {
    Rng rng(1);
    std::set<Side> sides;
    for (int i = 0; i < 500; ++i) {
      const Triple& t = triples[static_cast<std::size_t>(i) % triples.size()];
      const auto s = sample_targets(t, index, entities, {1, 3}, rng);
      sides.insert(s.side);
      CHECK((s.side == Side::kHead) == (s.p_c > 0.5));
      const auto truth = index.targets(t, s.side);
      REQUIRE(s.positives.size() == 1);
      CHECK(std::find(truth.begin(), truth.end(), s.positives[0]) != truth.end());
      CHECK(s.negatives.size() == 3);
      const std::set<EntityId> uniq(s.negatives.begin(), s.negatives.end());
      CHECK(uniq.size() == s.negatives.size());
      for (EntityId e : s.negatives) CHECK(std::find(truth.begin(), truth.end(), e) == truth.end());
    }
    CHECK(sides.size() == 2);
  }
  SUBCASE("short supply returns everything available") {
    Rng rng(2);
    const auto s = sample_targets(triples[0], index, entities, {5, 50}, rng);
    const auto truth = index.targets(triples[0], s.side);
    CHECK(s.positives.size() == truth.size());
    CHECK(s.negatives.size() == entities.size() - truth.size());
  }
  SUBCASE("every negative is eventually drawn") {
    Rng rng(3);
    std::set<EntityId> seen;
    for (int i = 0; i < 400; ++i) {
      const auto s = sample_targets(triples[0], index, entities, {1, 1}, rng);
      if (s.side == Side::kTail) seen.insert(s.negatives.begin(), s.negatives.end());
    }
    CHECK(seen == std::set<EntityId>{0, 3, 4, 5, 6});
  }
}
