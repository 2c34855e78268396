#include "conmask/encoder.hpp"

#include <cmath>
#include <string>

#include "conmask/error.hpp"

namespace conmask {

namespace {

nk::Tensor glorot(std::size_t width, std::size_t channels, Rng& rng) {
  const double fan = static_cast<double>(width * channels);
  const double limit = std::sqrt(6.0 / (fan + fan));
  nk::Tensor t({width, channels, channels});
  for (double& v : t.data()) v = uniform(rng, -limit, limit);
  return t;
}

void require_finite(const nk::Tensor& t, std::size_t layer) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError("target fusion: non-finite activation in layer " + std::to_string(layer + 1));
    }
  }
}

}  // namespace

FcnParams::FcnParams(std::size_t channels_, std::size_t width_, Rng& rng)
    : channels(channels_), width(width_) {
  if (channels == 0) throw UsageError("FcnParams: channel count must be positive");
  if (width % 2 == 0) throw UsageError("FcnParams: convolution width must be odd");
  for (std::size_t l = 0; l < kFcnLayers; ++l) {
    const std::string p = "fcn." + std::to_string(l) + ".";
    FcnLayer& layer = layers[l];
    layer.kernel1 = nk::Parameter(p + "kernel1", glorot(width, channels, rng));
    layer.bias1 = nk::Parameter(p + "bias1", nk::Tensor({1, channels}));
    layer.kernel2 = nk::Parameter(p + "kernel2", glorot(width, channels, rng));
    layer.bias2 = nk::Parameter(p + "bias2", nk::Tensor({1, channels}));
    layer.gamma = nk::Parameter(p + "gamma", nk::Tensor({1, channels}, 1.0));
    layer.beta = nk::Parameter(p + "beta", nk::Tensor({1, channels}));
    layer.bn = nk::BatchNormState(channels);
  }
}

std::vector<nk::Parameter*> FcnParams::parameters() {
  std::vector<nk::Parameter*> out;
  for (FcnLayer& l : layers) {
    for (nk::Parameter* p : {&l.kernel1, &l.bias1, &l.kernel2, &l.bias2, &l.gamma, &l.beta}) {
      out.push_back(p);
    }
  }
  return out;
}

std::vector<nk::Var> target_fusion(nk::Graph& g, FcnParams& params, std::span<const nk::Var> inputs,
                                   const FusionOptions& options) {
  if (inputs.empty()) return {};
  std::vector<nk::Var> xs;
  xs.reserve(inputs.size());
  for (nk::Var in : inputs) {
    const nk::Tensor& v = g.value(in);
    if (v.rank() != 2 || v.shape()[1] != params.channels) {
      throw ShapeError("target fusion: input " + v.shape_string() + " does not have " +
                       std::to_string(params.channels) + " channels");
    }
    const std::size_t rows = v.rows();  // v dangles once nodes are pushed
    if (rows >= kMinFusionLength) {
      xs.push_back(in);
      continue;
    }
    const nk::Var pad = g.constant(nk::Tensor({kMinFusionLength - rows, params.channels}));
    const std::array<nk::Var, 2> parts{in, pad};
    xs.push_back(rows == 0 ? pad : nk::concat_rows(g, parts));
  }

  for (std::size_t l = 0; l < kFcnLayers; ++l) {
    FcnLayer& layer = params.layers[l];
    const nk::Var k1 = g.parameter(layer.kernel1), b1 = g.parameter(layer.bias1);
    const nk::Var k2 = g.parameter(layer.kernel2), b2 = g.parameter(layer.bias2);
    const nk::Var gamma = g.parameter(layer.gamma), beta = g.parameter(layer.beta);

    std::vector<nk::Var> acts;
    std::vector<std::size_t> offsets{0};
    acts.reserve(xs.size());
    for (nk::Var x : xs) {
      acts.push_back(nk::sigmoid(g, nk::conv1d(g, nk::conv1d(g, x, k1, b1), k2, b2)));
      offsets.push_back(offsets.back() + g.value(acts.back()).rows());
    }
    nk::Var joined = acts.size() == 1 ? acts[0] : nk::concat_rows(g, acts);
    joined = nk::batch_norm(g, joined, gamma, beta, layer.bn);
    joined = nk::dropout(g, joined, options.keep_p);
    require_finite(g.value(joined), l);

    const bool last = l + 1 == kFcnLayers;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const nk::Var part =
          acts.size() == 1 ? joined : nk::slice_rows(g, joined, offsets[i], offsets[i + 1]);
      xs[i] = last ? nk::meanpool_rows(g, part) : nk::maxpool1d(g, part, options.pool, options.pool);
    }
  }
  return xs;
}

nk::Var target_fusion(nk::Graph& g, FcnParams& params, nk::Var input, const FusionOptions& options) {
  const std::array<nk::Var, 1> one{input};
  return target_fusion(g, params, one, options)[0];
}

nk::Var semantic_avg(nk::Graph& g, nk::Var tokens, std::size_t valid, bool* empty) {
  const nk::Tensor& v = g.value(tokens);
  if (v.rank() != 2 || valid > v.rows()) {
    throw ShapeError("semantic_avg: valid length " + std::to_string(valid) + " for " +
                     v.shape_string());
  }
  if (empty) *empty = valid == 0;
  if (valid == 0) return g.constant(nk::Tensor({1, v.shape()[1]}));
  const nk::Var head = valid == v.rows() ? tokens : nk::slice_rows(g, tokens, 0, valid);
  return nk::meanpool_rows(g, head);
}

nk::Tensor semantic_avg(const nk::Tensor& tokens, std::size_t valid, bool* empty) {
  nk::Graph g(nk::Mode::kInfer);
  return g.value(semantic_avg(g, g.constant(tokens), valid, empty));
}

}  // namespace conmask
