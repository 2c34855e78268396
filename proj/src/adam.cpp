#include "conmask/adam.hpp"

#include <cmath>

#include "conmask/error.hpp"

namespace conmask::nk {

AdamState::AdamState(std::span<Parameter* const> params, AdamOptions opts) : options(opts) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Parameter* p : params) {
    first_moment.emplace_back(p->value.shape());
    second_moment.emplace_back(p->value.shape());
  }
}

void adam_update(std::span<Parameter* const> params, AdamState& state) {
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_update: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (!state.first_moment[i].same_shape(p.value)) {
      throw ShapeError("adam_update: moment shape " + state.first_moment[i].shape_string() +
                       " does not match parameter " + p.name + " " + p.value.shape_string());
    }
    if (!p.trainable || !p.grad.same_shape(p.value)) continue;
    for (double v : p.grad.data()) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in parameter " + p.name);
    }
  }

  ++state.step;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(o.beta1, t);
  const double corr2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const bool has_grad = p.grad.same_shape(p.value);
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = has_grad ? p.grad[j] : 0.0;
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[j] / corr1;
      const double v_hat = v[j] / corr2;
      p.value[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace conmask::nk
