#include <cmath>
#include <filesystem>
#include <vector>

#include "conmask/embeddings.hpp"
#include "conmask/error.hpp"
#include "conmask/grad_check.hpp"
#include "conmask/knowledge_graph.hpp"
#include "conmask/masking.hpp"
#include "conmask/ops.hpp"
#include "doctest.h"

using namespace conmask;
using nk::Tensor;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (double& v : t.data()) v = uniform(rng, -1.0, 1.0);
  return t;
}

double cos_loop(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    dot += a(i, c) * b(j, c);
    na += a(i, c) * a(i, c);
    nb += b(j, c) * b(j, c);
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> mwrw_oracle(const Tensor& desc, const Tensor& rel) {
  std::vector<double> out(desc.rows());
  for (std::size_t i = 0; i < desc.rows(); ++i) {
    double best = cos_loop(desc, i, rel, 0);
    for (std::size_t j = 1; j < rel.rows(); ++j) best = std::max(best, cos_loop(desc, i, rel, j));
    out[i] = best;
  }
  return out;
}

std::vector<double> window_oracle(const std::vector<double>& w, std::size_t k) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double best = w[i];
    for (std::size_t d = 1; d <= k && d <= i; ++d) best = std::max(best, w[i - d]);
    out[i] = best;
  }
  return out;
}

}  // namespace

TEST_CASE("mwrw examples") {
  const Tensor rel = Tensor::matrix({{1, 2, 0}, {0, 0, 3}});
  const Tensor desc = Tensor::matrix({{1, 2, 0}, {2, -1, 0}, {0, 0, 0}, {0, 0, -5}});
  const auto w = mwrw_weights(desc, rel);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.0));
  CHECK(w[2] == 0.0);  // zero row
  CHECK(w[3] == doctest::Approx(0.0));  // -1 vs rel 0 and 0 vs rel 1: max is 0
}

TEST_CASE("mwrw matches the double-loop oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t L = 1 + uniform_index(rng, 20), R = 1 + uniform_index(rng, 4),
                      k = 1 + uniform_index(rng, 16);
    const Tensor desc = random_matrix(L, k, rng), rel = random_matrix(R, k, rng);
    const auto w = mwrw_weights(desc, rel);
    const auto o = mwrw_oracle(desc, rel);
    for (std::size_t i = 0; i < L; ++i) CHECK(std::abs(w[i] - o[i]) <= 1e-12);
  }
}

TEST_CASE("mcrw examples") {
  const std::vector<double> w{0.1, 0.9, 0.2, 0.3};
  CHECK(mcrw_weights(w, 0) == w);
  CHECK(mcrw_weights(w, 2) == std::vector<double>{0.1, 0.9, 0.9, 0.9});
  const std::vector<double> flat(7, 0.25);
  for (std::size_t k : {0u, 1u, 6u, 50u}) CHECK(mcrw_weights(flat, k) == flat);
}

TEST_CASE("mcrw properties") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 1 + uniform_index(rng, 25);
    std::vector<double> w(L);
    for (double& v : w) v = uniform(rng, -1, 1);
    const std::size_t k = uniform_index(rng, 8);
    const auto m = mcrw_weights(w, k);
    CHECK(m == window_oracle(w, k));
    for (std::size_t i = 0; i < L; ++i) CHECK(m[i] >= w[i]);
    CHECK(mcrw_weights(w, L - 1) == mcrw_weights(w, L + 10));
  }
}

TEST_CASE("apply_mask") {
  SUBCASE("relation word in the description lifts the following window") {
    Rng rng(4);
    Tensor desc = random_matrix(12, 5, rng);
    const Tensor rel = random_matrix(1, 5, rng);
    for (std::size_t c = 0; c < 5; ++c) desc(3, c) = 2.0 * rel(0, c);
    const auto mc = apply_mask(desc, rel, {3, MaskMode::kMcrw});
    for (std::size_t i = 3; i <= 6; ++i) CHECK(mc.mcrw[i] == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t c = 0; c < 5; ++c) CHECK(mc.masked(i, c) == mc.mcrw[i] * desc(i, c));
  }
  SUBCASE("orthogonal description masks to zero") {
    const Tensor desc = Tensor::matrix({{0, 1, 0}, {0, 0, 2}, {0, 3, 3}});
    const Tensor rel = Tensor::matrix({{4, 0, 0}});
    const auto mc = apply_mask(desc, rel);
    for (double v : mc.masked.data()) CHECK(v == 0.0);
  }
  SUBCASE("mwrw mode applies the raw weights") {
    Rng rng(5);
    const Tensor desc = random_matrix(6, 4, rng), rel = random_matrix(2, 4, rng);
    const auto mc = apply_mask(desc, rel, {6, MaskMode::kMwrw});
    for (std::size_t i = 0; i < 6; ++i) CHECK(mc.masked(i, 0) == mc.mwrw[i] * desc(i, 0));
  }
  SUBCASE("padding rows stay zero") {
    Rng rng(6);
    Tensor desc = random_matrix(6, 4, rng);
    const Tensor rel = random_matrix(1, 4, rng);
    for (std::size_t i = 4; i < 6; ++i)
      for (std::size_t c = 0; c < 4; ++c) desc(i, c) = 0.0;
    const auto mc = apply_mask(desc, rel);
    CHECK(mc.mwrw[4] == 0.0);
    for (std::size_t i = 4; i < 6; ++i)
      for (std::size_t c = 0; c < 4; ++c) CHECK(mc.masked(i, c) == 0.0);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(apply_mask(Tensor({3, 4}), Tensor({1, 5})), ShapeError);
    CHECK_THROWS_AS(parse_mask_mode("max"), UsageError);
  }
}

TEST_CASE("mwrw is invariant to positive rescaling") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor desc = random_matrix(7, 6, rng), rel = random_matrix(3, 6, rng);
    const auto before = mwrw_weights(desc, rel);
    const std::size_t row = uniform_index(rng, 7);
    const double s = uniform(rng, 0.1, 10.0);
    for (double& v : desc.row_span(row)) v *= s;
    for (double& v : rel.row_span(uniform_index(rng, 3))) v *= s;
    const auto after = mwrw_weights(desc, rel);
    for (std::size_t i = 0; i < 7; ++i) CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
  }
}

TEST_CASE("masking gradients") {
  Rng rng(31);
  nk::Parameter desc("desc", random_matrix(9, 4, rng));
  nk::Parameter rel("rel", random_matrix(2, 4, rng));
  nk::Parameter probe("probe", random_matrix(9, 4, rng));
  std::vector<nk::Parameter*> params{&desc, &rel};
  for (MaskMode mode : {MaskMode::kMwrw, MaskMode::kMcrw}) {
    auto build = [&](nk::Graph& g) {
      const auto mv = apply_mask(g, g.parameter(desc), g.parameter(rel), {3, mode});
      return nk::sum(g, nk::mul(g, mv.masked, g.parameter(probe)));
    };
    CHECK(nk::grad_check(build, params).max_relative_error < 1e-4);
  }
  SUBCASE("detach flags stop each path") {
    for (int which = 0; which < 2; ++which) {
      MaskOptions o;
      o.detach_weights = which == 0;
      o.detach_content = which == 1;
      nk::Graph g(nk::Mode::kTrain);
      const nk::Var d = g.parameter(desc);
      const nk::Var r = g.parameter(rel);
      const auto mv = apply_mask(g, d, r, o);
      g.backward(nk::sum(g, nk::mul(g, mv.masked, g.parameter(probe))));
      const Tensor rel_grad = g.grad(r);
      double mag = 0;
      for (double v : rel_grad.data()) mag += std::abs(v);
      if (which == 0) CHECK(mag == 0.0);
      else CHECK(mag > 0.0);
    }
  }
}

TEST_CASE("Michelle Obama fixture") {
  const std::filesystem::path dir = std::filesystem::path(CONMASK_SOURCE_DIR) / "data/fixtures/michelle_obama";
  auto g = load_graph(dir / "triples.tsv", dir / "names.tsv", dir / "descriptions.tsv");
  auto table = load_embeddings(dir / "vectors.txt", corpus_vocabulary(g));
  CHECK(table.dim() == 200);
  const auto e = *g.entities.find("Michelle_Obama");
  const auto r = *g.relations.find("spouse");
  const auto& tokens = g.entity_descriptions[static_cast<std::size_t>(e)];
  const std::vector<std::string> expected{
      "michelle", "lavaughn", "robinson", "obama", "born",   "january", "17",      "1964",
      "american", "lawyer",   "writer",   "first", "lady",   "united",  "states",  "2009",
      "2017",     "she",      "married",  "44th",  "previous", "president", "united", "states",
      "barack",   "obama"};
  CHECK(tokens == expected);

  nk::Graph gr(nk::Mode::kInfer);
  const auto desc = gr.value(nk::gather_rows(gr, table.vectors, table.lookup_all(tokens)));
  const auto rel = gr.value(nk::gather_rows(gr, table.vectors, table.lookup_all(g.relation_names[static_cast<std::size_t>(r)])));
  const auto mc = apply_mask(desc, rel, {6, MaskMode::kMcrw});
  const std::size_t married = 18;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != married) CHECK(mc.mwrw[i] < mc.mwrw[married]);
  }
  CHECK(mc.mwrw[married] == doctest::Approx(0.55).epsilon(1e-6));
  for (std::size_t i = married + 1; i <= married + 6; ++i) CHECK(mc.mcrw[i] >= mc.mwrw[married] - 1e-12);
}
