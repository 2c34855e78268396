#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "conmask/graph.hpp"

// Differentiable operations over Graph nodes. Every op validates shapes and
// throws ShapeError naming the offending shapes.
namespace conmask::nk {

// --- linear algebra and elementwise -----------------------------------------

Var matmul(Graph& g, Var a, Var b);
Var transpose(Graph& g, Var a);
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double factor);
Var sum(Graph& g, Var a);
Var detach(Graph& g, Var a);

Var sigmoid(Graph& g, Var x);
Var softmax_row(Graph& g, Var x);
Var log_softmax_row(Graph& g, Var x);
// Inverted dropout: active only in train mode, kept units scaled by 1/keep_p.
Var dropout(Graph& g, Var x, double keep_p);

// --- sequence ops over [L x C] ----------------------------------------------

// Cross-correlation along rows with zero "same" padding, stride 1.
// kernel is [w x C_in x C_out] with w odd, bias is [1 x C_out].
Var conv1d(Graph& g, Var x, Var kernel, Var bias);
// Column-wise max over windows of `pool` rows advanced by `stride`. A short
// final window is allowed. Gradient goes to the first argmax.
Var maxpool1d(Graph& g, Var x, std::size_t pool = 2, std::size_t stride = 2);
Var meanpool_rows(Graph& g, Var x);

struct BatchNormState {
  Tensor moving_mean;
  Tensor moving_var;
  bool initialized = false;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels);
};

// Per-channel normalization over the rows of x. Train mode uses the batch
// statistics (biased variance) and updates the moving averages as
// m <- decay * m + (1 - decay) * batch. Infer mode reads the moving
// averages and throws if no train-mode call has happened.
Var batch_norm(Graph& g, Var x, Var gamma, Var beta, BatchNormState& state,
               double decay = 0.9, double eps = 1e-5);

// Rows scaled to unit L2 norm; zero rows stay zero (with zero gradient).
Var normalize_rows(Graph& g, Var x);
// [L x C] -> [L x 1], max of each row, gradient to the first argmax.
Var row_max(Graph& g, Var x);
// [L x 1] -> [L x 1], out[i] = max(v[max(0, i - window) .. i]).
Var trailing_window_max(Graph& g, Var v, std::size_t window);
// out[i, :] = w[i] * x[i, :] for x [L x C] and w [L x 1].
Var scale_rows(Graph& g, Var x, Var w);

// --- structure ---------------------------------------------------------------

// Rows of `table` selected by ids; negative ids produce zero rows that
// receive no gradient. The backward scatters into table.grad directly.
Var gather_rows(Graph& g, Parameter& table, std::span<const std::int32_t> ids);
Var concat_rows(Graph& g, std::span<const Var> parts);
Var slice_rows(Graph& g, Var x, std::size_t begin, std::size_t end);
// Scalars [1 x 1] -> [1 x n].
Var stack(Graph& g, std::span<const Var> scalars);
// Element `index` of the flattened tensor as [1 x 1].
Var pick(Graph& g, Var x, std::size_t index);

// Cosine similarity of two [1 x k] rows as [1 x 1]; zero when either row has
// zero norm.
Var cosine(Graph& g, Var a, Var b);

}  // namespace conmask::nk
