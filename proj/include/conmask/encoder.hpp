#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "conmask/graph.hpp"
#include "conmask/ops.hpp"

namespace conmask {

inline constexpr std::size_t kFcnLayers = 3;
inline constexpr std::size_t kMinFusionLength = 4;

struct FcnLayer {
  nk::Parameter kernel1, bias1, kernel2, bias2, gamma, beta;
  nk::BatchNormState bn;
};

// Three layers of conv -> conv -> sigmoid -> batch norm -> dropout -> pool
// with a constant channel count. The first two layers max-pool (2, 2), the
// last one mean-pools to a single row.
struct FcnParams {
  std::size_t channels = 0;
  std::size_t width = 3;
  std::array<FcnLayer, kFcnLayers> layers;

  FcnParams() = default;
  // Glorot-uniform kernels (fan_in = w * C, fan_out = w * C), zero biases,
  // gamma 1, beta 0, batch-norm moving stats (0, 1) and uninitialized.
  FcnParams(std::size_t channels, std::size_t width, Rng& rng);

  std::vector<nk::Parameter*> parameters();
};

struct FusionOptions {
  double keep_p = 0.5;
  std::size_t pool = 2;
};

// Fuses several masked matrices in one pass. In train mode the batch-norm
// statistics of each layer are pooled over the rows of every input, the way
// a [batch, length] batch is normalised. Inputs shorter than 4 rows are
// padded with zero rows. Returns one [1 x C] row per input.
std::vector<nk::Var> target_fusion(nk::Graph& g, FcnParams& params, std::span<const nk::Var> inputs,
                                   const FusionOptions& options = {});
nk::Var target_fusion(nk::Graph& g, FcnParams& params, nk::Var input,
                      const FusionOptions& options = {});

// Mean of the first `valid` rows. With valid == 0 the result is a zero row
// and *empty (when given) is set.
nk::Var semantic_avg(nk::Graph& g, nk::Var tokens, std::size_t valid, bool* empty = nullptr);
nk::Tensor semantic_avg(const nk::Tensor& tokens, std::size_t valid, bool* empty = nullptr);

}  // namespace conmask
