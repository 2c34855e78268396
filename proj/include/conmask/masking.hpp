#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "conmask/graph.hpp"

namespace conmask {

enum class MaskMode { kMwrw, kMcrw };

std::string to_string(MaskMode mode);
MaskMode parse_mask_mode(std::string_view text);

struct MaskOptions {
  std::size_t window = 6;  // k_m
  MaskMode mode = MaskMode::kMcrw;
  // Stop gradients through the weight path or the content path.
  bool detach_weights = false;
  bool detach_content = false;
};

// Per-word weights and the re-weighted description matrix.
struct MaskedContent {
  std::vector<double> mwrw;
  std::vector<double> mcrw;
  nk::Tensor masked;  // [L x k], row i = weight[i] * desc row i
};

// weight[i] = max_j cos(desc_i, rel_j); zero rows score 0 against everything.
std::vector<double> mwrw_weights(const nk::Tensor& desc, const nk::Tensor& rel);
// out[i] = max(w[max(0, i - k_m) .. i]).
std::vector<double> mcrw_weights(std::span<const double> mwrw, std::size_t k_m);
MaskedContent apply_mask(const nk::Tensor& desc, const nk::Tensor& rel,
                         const MaskOptions& options = {});

// Graph form used inside the model.
struct MaskVars {
  nk::Var mwrw;    // [L x 1]
  nk::Var weights; // [L x 1], the weights actually applied
  nk::Var masked;  // [L x k]
};

MaskVars apply_mask(nk::Graph& g, nk::Var desc, nk::Var rel, const MaskOptions& options = {});

}  // namespace conmask
