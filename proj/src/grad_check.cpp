#include "conmask/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "conmask/error.hpp"

namespace conmask::nk {

namespace {

double evaluate(const std::function<Var(Graph&)>& build, Mode mode, std::uint64_t seed) {
  Graph g(mode, seed);
  Var out = build(g);
  const Tensor& v = g.value(out);
  if (v.size() != 1) throw ShapeError("grad_check: output must be scalar, got " + v.shape_string());
  return v[0];
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(Graph&)>& build,
                           std::span<Parameter* const> params, double h, Mode mode,
                           std::uint64_t seed) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g(mode, seed);
    Var out = build(g);
    if (g.value(out).size() != 1) {
      throw ShapeError("grad_check: output must be scalar, got " + g.value(out).shape_string());
    }
    g.backward(out);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double saved = p.value[j];
      p.value[j] = saved + h;
      const double plus = evaluate(build, mode, seed);
      p.value[j] = saved - h;
      const double minus = evaluate(build, mode, seed);
      p.value[j] = saved;

      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[pi][j];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++result.coordinates;
      if (err > result.max_relative_error || !std::isfinite(err)) {
        result.max_relative_error = std::isfinite(err) ? err : INFINITY;
        result.worst_parameter = p.name;
        result.worst_index = j;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return result;
}

}  // namespace conmask::nk
