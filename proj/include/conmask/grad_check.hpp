#pragma once

#include <functional>
#include <span>
#include <string>

#include "conmask/graph.hpp"

namespace conmask::nk {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients against central differences for every
// coordinate of `params`. `build` must construct a fresh graph evaluation
// returning a scalar; it is called 1 + 2 * coordinates times and must be
// deterministic (seed any dropout inside it). The error for a coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckResult grad_check(const std::function<Var(Graph&)>& build,
                           std::span<Parameter* const> params, double h = 1e-4,
                           Mode mode = Mode::kTrain, std::uint64_t seed = 0);

}  // namespace conmask::nk
