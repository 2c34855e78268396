#include "conmask/masking.hpp"

#include <algorithm>

#include "conmask/error.hpp"
#include "conmask/ops.hpp"

namespace conmask {

std::string to_string(MaskMode mode) { return mode == MaskMode::kMwrw ? "mwrw" : "mcrw"; }

MaskMode parse_mask_mode(std::string_view text) {
  if (text == "mwrw") return MaskMode::kMwrw;
  if (text == "mcrw") return MaskMode::kMcrw;
  throw UsageError("mask mode must be mwrw or mcrw, got '" + std::string(text) + "'");
}

MaskVars apply_mask(nk::Graph& g, nk::Var desc, nk::Var rel, const MaskOptions& options) {
  const auto& dv = g.value(desc);
  const auto& rv = g.value(rel);
  if (dv.rank() != 2 || rv.rank() != 2 || dv.rows() == 0 || rv.rows() == 0 ||
      dv.shape()[1] != rv.shape()[1]) {
    throw ShapeError("apply_mask: description " + dv.shape_string() + " vs relation " +
                     rv.shape_string());
  }
  const nk::Var sims = nk::matmul(g, nk::normalize_rows(g, desc),
                                  nk::transpose(g, nk::normalize_rows(g, rel)));
  MaskVars out;
  out.mwrw = nk::row_max(g, sims);
  out.weights = options.mode == MaskMode::kMcrw ? nk::trailing_window_max(g, out.mwrw, options.window)
                                                : out.mwrw;
  const nk::Var w = options.detach_weights ? nk::detach(g, out.weights) : out.weights;
  const nk::Var content = options.detach_content ? nk::detach(g, desc) : desc;
  out.masked = nk::scale_rows(g, content, w);
  return out;
}

MaskedContent apply_mask(const nk::Tensor& desc, const nk::Tensor& rel, const MaskOptions& options) {
  nk::Graph g(nk::Mode::kInfer);
  MaskOptions mcrw = options;
  mcrw.mode = MaskMode::kMcrw;
  const auto vars = apply_mask(g, g.constant(desc), g.constant(rel), mcrw);
  MaskedContent out;
  const auto& w = g.value(vars.mwrw);
  out.mwrw.assign(w.data().begin(), w.data().end());
  const auto& c = g.value(vars.weights);
  out.mcrw.assign(c.data().begin(), c.data().end());
  if (options.mode == MaskMode::kMcrw) {
    out.masked = g.value(vars.masked);
  } else {
    out.masked = desc;
    for (std::size_t i = 0; i < desc.rows(); ++i)
      for (double& v : out.masked.row_span(i)) v *= out.mwrw[i];
  }
  return out;
}

std::vector<double> mwrw_weights(const nk::Tensor& desc, const nk::Tensor& rel) {
  return apply_mask(desc, rel, {0, MaskMode::kMwrw}).mwrw;
}

std::vector<double> mcrw_weights(std::span<const double> mwrw, std::size_t k_m) {
  std::vector<double> out(mwrw.size());
  for (std::size_t i = 0; i < mwrw.size(); ++i) {
    const std::size_t lo = i > k_m ? i - k_m : 0;
    out[i] = *std::max_element(mwrw.begin() + static_cast<std::ptrdiff_t>(lo),
                               mwrw.begin() + static_cast<std::ptrdiff_t>(i + 1));
  }
  return out;
}

}  // namespace conmask
