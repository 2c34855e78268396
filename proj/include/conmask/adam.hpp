#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "conmask/graph.hpp"

namespace conmask::nk {

struct AdamOptions {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments are kept per parameter in the order the parameters were given.
struct AdamState {
  AdamOptions options;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::span<Parameter* const> params, AdamOptions opts);
};

// One bias-corrected Adam step over every trainable parameter, reading
// Parameter::grad (missing gradients count as zero). Throws NumericError
// naming the parameter if any gradient is not finite; nothing is updated in
// that case.
void adam_update(std::span<Parameter* const> params, AdamState& state);

}  // namespace conmask::nk
