#include "conmask/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "conmask/error.hpp"

namespace conmask::nk {

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + t.shape_string());
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void require_rows(const Tensor& t, const char* op) {
  if (t.rows() == 0 || t.size() == 0) {
    throw ShapeError(std::string(op) + ": empty input " + t.shape_string());
  }
}

enum class Binary { kAdd, kSub, kMul };

Var elementwise(Graph& g, Var a, Var b, Binary kind, const char* op) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same(av, bv, op);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (kind) {
      case Binary::kAdd: out[i] = av[i] + bv[i]; break;
      case Binary::kSub: out[i] = av[i] - bv[i]; break;
      case Binary::kMul: out[i] = av[i] * bv[i]; break;
    }
  }
  return g.record(std::move(out), {a, b}, [a, b, kind](Graph& gr, const Tensor& dy) {
    if (Tensor* da = gr.grad_buffer(a)) {
      const Tensor& bv = gr.value(b);
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += kind == Binary::kMul ? dy[i] * bv[i] : dy[i];
    }
    if (Tensor* db = gr.grad_buffer(b)) {
      const Tensor& av = gr.value(a);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        switch (kind) {
          case Binary::kAdd: (*db)[i] += dy[i]; break;
          case Binary::kSub: (*db)[i] -= dy[i]; break;
          case Binary::kMul: (*db)[i] += dy[i] * av[i]; break;
        }
      }
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// --- linear algebra and elementwise -----------------------------------------

Var matmul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0]) {
    throw ShapeError("matmul: dimension mismatch " + av.shape_string() + " x " +
                     bv.shape_string());
  }
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av(i, p);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += aip * bv(p, j);
    }
  }
  return g.record(std::move(out), {a, b}, [a, b, m, k, n](Graph& gr, const Tensor& dy) {
    const Tensor& av = gr.value(a);
    const Tensor& bv = gr.value(b);
    if (Tensor* da = gr.grad_buffer(a)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += dy(i, j) * bv(p, j);
          (*da)(i, p) += s;
        }
    }
    if (Tensor* db = gr.grad_buffer(b)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av(i, p);
          for (std::size_t j = 0; j < n; ++j) (*db)(p, j) += aip * dy(i, j);
        }
    }
  });
}

Var transpose(Graph& g, Var a) {
  const Tensor& av = g.value(a);
  require_matrix(av, "transpose");
  const std::size_t r = av.shape()[0], c = av.shape()[1];
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = av(i, j);
  return g.record(std::move(out), {a}, [a, r, c](Graph& gr, const Tensor& dy) {
    Tensor* da = gr.grad_buffer(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*da)(i, j) += dy(j, i);
  });
}

Var add(Graph& g, Var a, Var b) { return elementwise(g, a, b, Binary::kAdd, "add"); }
Var sub(Graph& g, Var a, Var b) { return elementwise(g, a, b, Binary::kSub, "sub"); }
Var mul(Graph& g, Var a, Var b) { return elementwise(g, a, b, Binary::kMul, "mul"); }

Var scale(Graph& g, Var a, double factor) {
  Tensor out = g.value(a);
  for (double& v : out.data()) v *= factor;
  return g.record(std::move(out), {a}, [a, factor](Graph& gr, const Tensor& dy) {
    Tensor* da = gr.grad_buffer(a);
    for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += factor * dy[i];
  });
}

Var sum(Graph& g, Var a) {
  double s = 0.0;
  for (double v : g.value(a).data()) s += v;
  return g.record(Tensor::scalar(s), {a}, [a](Graph& gr, const Tensor& dy) {
    Tensor* da = gr.grad_buffer(a);
    for (double& v : da->data()) v += dy[0];
  });
}

Var detach(Graph& g, Var a) { return g.constant(g.value(a)); }

Var sigmoid(Graph& g, Var x) {
  Tensor out = g.value(x);
  for (double& v : out.data()) v = stable_sigmoid(v);
  return g.record(std::move(out), {x}, [x](Graph& gr, const Tensor& dy) {
    const Tensor& xv = gr.value(x);
    Tensor* dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const double y = stable_sigmoid(xv[i]);
      (*dx)[i] += dy[i] * y * (1.0 - y);
    }
  });
}

Var softmax_row(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_matrix(xv, "softmax_row");
  require_rows(xv, "softmax_row");
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto in = xv.row_span(r);
    auto o = out.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) z += (o[j] = std::exp(in[j] - mx));
    for (double& v : o) v /= z;
  }
  Tensor y = out;
  return g.record(std::move(out), {x}, [x, y = std::move(y)](Graph& gr, const Tensor& dy) {
    Tensor* dx = gr.grad_buffer(x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row_span(r);
      auto dyr = dy.row_span(r);
      double dot = 0.0;
      for (std::size_t j = 0; j < yr.size(); ++j) dot += dyr[j] * yr[j];
      auto dxr = dx->row_span(r);
      for (std::size_t j = 0; j < yr.size(); ++j) dxr[j] += yr[j] * (dyr[j] - dot);
    }
  });
}

Var log_softmax_row(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_matrix(xv, "log_softmax_row");
  require_rows(xv, "log_softmax_row");
  Tensor out(xv.shape());
  Tensor soft(xv.shape());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto in = xv.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    auto o = out.row_span(r);
    auto s = soft.row_span(r);
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = in[j] - lse;
      s[j] = std::exp(o[j]);
    }
  }
  return g.record(std::move(out), {x}, [x, soft = std::move(soft)](Graph& gr, const Tensor& dy) {
    Tensor* dx = gr.grad_buffer(x);
    for (std::size_t r = 0; r < soft.rows(); ++r) {
      auto dyr = dy.row_span(r);
      double total = 0.0;
      for (double v : dyr) total += v;
      auto sr = soft.row_span(r);
      auto dxr = dx->row_span(r);
      for (std::size_t j = 0; j < sr.size(); ++j) dxr[j] += dyr[j] - sr[j] * total;
    }
  });
}

Var dropout(Graph& g, Var x, double keep_p) {
  if (!(keep_p > 0.0) || keep_p > 1.0) {
    throw UsageError("dropout: keep probability must be in (0, 1], got " + std::to_string(keep_p));
  }
  if (!g.training() || keep_p == 1.0) return x;
  const Tensor& xv = g.value(x);
  Tensor mask(xv.shape());
  for (double& m : mask.data()) m = uniform01(g.rng()) < keep_p ? 1.0 / keep_p : 0.0;
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return g.record(std::move(out), {x}, [x, mask = std::move(mask)](Graph& gr, const Tensor& dy) {
    Tensor* dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i] * mask[i];
  });
}

// --- sequence ops -------------------------------------------------------------

Var conv1d(Graph& g, Var x, Var kernel, Var bias) {
  const Tensor& xv = g.value(x);
  const Tensor& kv = g.value(kernel);
  const Tensor& bv = g.value(bias);
  require_matrix(xv, "conv1d");
  if (xv.rows() == 0) throw ShapeError("conv1d: empty input " + xv.shape_string());
  if (kv.rank() != 3) throw ShapeError("conv1d: kernel must be rank 3, got " + kv.shape_string());
  const std::size_t len = xv.rows(), cin = xv.shape()[1];
  const std::size_t width = kv.shape()[0], cout = kv.shape()[2];
  if (width % 2 == 0) {
    throw ShapeError("conv1d: kernel width must be odd, got " + std::to_string(width));
  }
  if (kv.shape()[1] != cin) {
    throw ShapeError("conv1d: kernel " + kv.shape_string() + " does not match input " +
                     xv.shape_string());
  }
  if (bv.size() != cout) {
    throw ShapeError("conv1d: bias " + bv.shape_string() + " does not match kernel " +
                     kv.shape_string());
  }
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  Tensor out({len, cout});
  for (std::size_t t = 0; t < len; ++t) {
    double* o = &out(t, 0);
    for (std::size_t c = 0; c < cout; ++c) o[c] = bv[c];
    for (std::size_t d = 0; d < width; ++d) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + d) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      const double* in = xv.data().data() + static_cast<std::size_t>(src) * cin;
      const double* k = kv.data().data() + d * cin * cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double a = in[ci];
        if (a == 0.0) continue;
        const double* kr = k + ci * cout;
        for (std::size_t c = 0; c < cout; ++c) o[c] += a * kr[c];
      }
    }
  }
  return g.record(std::move(out), {x, kernel, bias},
                  [=](Graph& gr, const Tensor& dy) {
    const Tensor& xv = gr.value(x);
    const Tensor& kv = gr.value(kernel);
    Tensor* dx = gr.grad_buffer(x);
    Tensor* dk = gr.grad_buffer(kernel);
    if (Tensor* db = gr.grad_buffer(bias)) {
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t c = 0; c < cout; ++c) (*db)[c] += dy(t, c);
    }
    for (std::size_t t = 0; t < len; ++t) {
      const double* dyr = dy.data().data() + t * cout;
      for (std::size_t d = 0; d < width; ++d) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + d) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        const auto s = static_cast<std::size_t>(src);
        const std::size_t kbase = d * cin * cout;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const std::size_t krow = kbase + ci * cout;
          if (dx) {
            double acc = 0.0;
            for (std::size_t c = 0; c < cout; ++c) acc += dyr[c] * kv[krow + c];
            (*dx)(s, ci) += acc;
          }
          if (dk) {
            const double a = xv(s, ci);
            if (a == 0.0) continue;
            double* dkr = &(*dk)[krow];
            for (std::size_t c = 0; c < cout; ++c) dkr[c] += a * dyr[c];
          }
        }
      }
    }
  });
}

Var maxpool1d(Graph& g, Var x, std::size_t pool, std::size_t stride) {
  const Tensor& xv = g.value(x);
  require_matrix(xv, "maxpool1d");
  require_rows(xv, "maxpool1d");
  if (pool == 0 || stride == 0) throw ShapeError("maxpool1d: pool and stride must be positive");
  const std::size_t len = xv.rows(), ch = xv.shape()[1];
  const std::size_t n_out = len <= pool ? 1 : (len - pool + stride - 1) / stride + 1;
  Tensor out({n_out, ch});
  std::vector<std::size_t> argmax(n_out * ch);
  for (std::size_t w = 0; w < n_out; ++w) {
    const std::size_t begin = w * stride;
    const std::size_t end = std::min(begin + pool, len);
    for (std::size_t c = 0; c < ch; ++c) {
      std::size_t best = begin;
      for (std::size_t r = begin + 1; r < end; ++r) {
        if (xv(r, c) > xv(best, c)) best = r;
      }
      out(w, c) = xv(best, c);
      argmax[w * ch + c] = best;
    }
  }
  return g.record(std::move(out), {x},
                  [x, ch, argmax = std::move(argmax)](Graph& gr, const Tensor& dy) {
    Tensor* dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < argmax.size(); ++i) (*dx)(argmax[i], i % ch) += dy[i];
  });
}

Var meanpool_rows(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_matrix(xv, "meanpool_rows");
  require_rows(xv, "meanpool_rows");
  const std::size_t len = xv.rows(), ch = xv.shape()[1];
  Tensor out({1, ch});
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t c = 0; c < ch; ++c) out[c] += xv(r, c);
  for (double& v : out.data()) v /= static_cast<double>(len);
  return g.record(std::move(out), {x}, [x, len, ch](Graph& gr, const Tensor& dy) {
    Tensor* dx = gr.grad_buffer(x);
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t r = 0; r < len; ++r)
      for (std::size_t c = 0; c < ch; ++c) (*dx)(r, c) += dy[c] * inv;
  });
}

BatchNormState::BatchNormState(std::size_t channels)
    : moving_mean({1, channels}, 0.0), moving_var({1, channels}, 1.0) {}

Var batch_norm(Graph& g, Var x, Var gamma, Var beta, BatchNormState& state, double decay,
               double eps) {
  const Tensor& xv = g.value(x);
  require_matrix(xv, "batch_norm");
  require_rows(xv, "batch_norm");
  const std::size_t len = xv.rows(), ch = xv.shape()[1];
  const Tensor& gv = g.value(gamma);
  const Tensor& bv = g.value(beta);
  if (gv.size() != ch || bv.size() != ch) {
    throw ShapeError("batch_norm: gamma " + gv.shape_string() + " / beta " + bv.shape_string() +
                     " do not match input " + xv.shape_string());
  }
  if (state.moving_mean.size() != ch) state = BatchNormState(ch);

  Tensor mean({1, ch}), var({1, ch});
  if (g.training()) {
    for (std::size_t r = 0; r < len; ++r)
      for (std::size_t c = 0; c < ch; ++c) mean[c] += xv(r, c);
    for (double& m : mean.data()) m /= static_cast<double>(len);
    for (std::size_t r = 0; r < len; ++r)
      for (std::size_t c = 0; c < ch; ++c) {
        const double d = xv(r, c) - mean[c];
        var[c] += d * d;
      }
    for (double& v : var.data()) v /= static_cast<double>(len);
    for (std::size_t c = 0; c < ch; ++c) {
      state.moving_mean[c] = decay * state.moving_mean[c] + (1.0 - decay) * mean[c];
      state.moving_var[c] = decay * state.moving_var[c] + (1.0 - decay) * var[c];
    }
    state.initialized = true;
  } else {
    if (!state.initialized) {
      throw Error("batch_norm: inference requested before any training-mode call");
    }
    mean = state.moving_mean;
    var = state.moving_var;
  }

  Tensor inv_std({1, ch});
  for (std::size_t c = 0; c < ch; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  Tensor xhat(xv.shape()), out(xv.shape());
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t c = 0; c < ch; ++c) {
      xhat(r, c) = (xv(r, c) - mean[c]) * inv_std[c];
      out(r, c) = gv[c] * xhat(r, c) + bv[c];
    }

  const bool batch_stats = g.training();
  return g.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, len, ch, batch_stats, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](Graph& gr, const Tensor& dy) {
    const Tensor& gv = gr.value(gamma);
    if (Tensor* dg = gr.grad_buffer(gamma)) {
      for (std::size_t r = 0; r < len; ++r)
        for (std::size_t c = 0; c < ch; ++c) (*dg)[c] += dy(r, c) * xhat(r, c);
    }
    if (Tensor* db = gr.grad_buffer(beta)) {
      for (std::size_t r = 0; r < len; ++r)
        for (std::size_t c = 0; c < ch; ++c) (*db)[c] += dy(r, c);
    }
    Tensor* dx = gr.grad_buffer(x);
    if (!dx) return;
    if (!batch_stats) {
      for (std::size_t r = 0; r < len; ++r)
        for (std::size_t c = 0; c < ch; ++c) (*dx)(r, c) += dy(r, c) * gv[c] * inv_std[c];
      return;
    }
    // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
    const double n = static_cast<double>(len);
    for (std::size_t c = 0; c < ch; ++c) {
      double mean_d = 0.0, mean_dx = 0.0;
      for (std::size_t r = 0; r < len; ++r) {
        const double d = dy(r, c) * gv[c];
        mean_d += d;
        mean_dx += d * xhat(r, c);
      }
      mean_d /= n;
      mean_dx /= n;
      for (std::size_t r = 0; r < len; ++r) {
        const double d = dy(r, c) * gv[c];
        (*dx)(r, c) += inv_std[c] * (d - mean_d - xhat(r, c) * mean_dx);
      }
    }
  });
}

Var normalize_rows(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_matrix(xv, "normalize_rows");
  const std::size_t len = xv.rows(), ch = xv.shape()[1];
  Tensor out(xv.shape());
  std::vector<double> norms(len, 0.0);
  for (std::size_t r = 0; r < len; ++r) {
    double s = 0.0;
    for (double v : xv.row_span(r)) s += v * v;
    norms[r] = std::sqrt(s);
    if (norms[r] == 0.0) continue;
    for (std::size_t c = 0; c < ch; ++c) out(r, c) = xv(r, c) / norms[r];
  }
  Tensor y = out;
  return g.record(std::move(out), {x},
                  [x, len, ch, norms = std::move(norms), y = std::move(y)](Graph& gr,
                                                                           const Tensor& dy) {
    Tensor* dx = gr.grad_buffer(x);
    for (std::size_t r = 0; r < len; ++r) {
      if (norms[r] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < ch; ++c) dot += y(r, c) * dy(r, c);
      for (std::size_t c = 0; c < ch; ++c) (*dx)(r, c) += (dy(r, c) - y(r, c) * dot) / norms[r];
    }
  });
}

Var row_max(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_matrix(xv, "row_max");
  require_rows(xv, "row_max");
  const std::size_t len = xv.rows(), ch = xv.shape()[1];
  Tensor out({len, 1});
  std::vector<std::size_t> argmax(len, 0);
  for (std::size_t r = 0; r < len; ++r) {
    for (std::size_t c = 1; c < ch; ++c) {
      if (xv(r, c) > xv(r, argmax[r])) argmax[r] = c;
    }
    out[r] = xv(r, argmax[r]);
  }
  return g.record(std::move(out), {x}, [x, argmax = std::move(argmax)](Graph& gr, const Tensor& dy) {
    Tensor* dx = gr.grad_buffer(x);
    for (std::size_t r = 0; r < argmax.size(); ++r) (*dx)(r, argmax[r]) += dy[r];
  });
}

Var trailing_window_max(Graph& g, Var v, std::size_t window) {
  const Tensor& vv = g.value(v);
  if (vv.rank() != 2 || vv.shape()[1] != 1) {
    throw ShapeError("trailing_window_max: expected [L x 1], got " + vv.shape_string());
  }
  const std::size_t len = vv.rows();
  Tensor out({len, 1});
  std::vector<std::size_t> argmax(len);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t begin = i > window ? i - window : 0;
    std::size_t best = begin;
    for (std::size_t j = begin + 1; j <= i; ++j) {
      if (vv[j] > vv[best]) best = j;
    }
    argmax[i] = best;
    out[i] = vv[best];
  }
  return g.record(std::move(out), {v}, [v, argmax = std::move(argmax)](Graph& gr, const Tensor& dy) {
    Tensor* dv = gr.grad_buffer(v);
    for (std::size_t i = 0; i < argmax.size(); ++i) (*dv)[argmax[i]] += dy[i];
  });
}

Var scale_rows(Graph& g, Var x, Var w) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  require_matrix(xv, "scale_rows");
  if (wv.size() != xv.rows()) {
    throw ShapeError("scale_rows: weights " + wv.shape_string() + " do not match rows of " +
                     xv.shape_string());
  }
  const std::size_t len = xv.rows(), ch = xv.shape()[1];
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t c = 0; c < ch; ++c) out(r, c) = wv[r] * xv(r, c);
  return g.record(std::move(out), {x, w}, [x, w, len, ch](Graph& gr, const Tensor& dy) {
    const Tensor& xv = gr.value(x);
    const Tensor& wv = gr.value(w);
    if (Tensor* dx = gr.grad_buffer(x)) {
      for (std::size_t r = 0; r < len; ++r)
        for (std::size_t c = 0; c < ch; ++c) (*dx)(r, c) += wv[r] * dy(r, c);
    }
    if (Tensor* dw = gr.grad_buffer(w)) {
      for (std::size_t r = 0; r < len; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < ch; ++c) s += dy(r, c) * xv(r, c);
        (*dw)[r] += s;
      }
    }
  });
}

// --- structure ---------------------------------------------------------------

Var gather_rows(Graph& g, Parameter& table, std::span<const std::int32_t> ids) {
  const Tensor& tv = table.value;
  require_matrix(tv, "gather_rows");
  const std::size_t ch = tv.shape()[1];
  Tensor out({ids.size(), ch});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0) continue;
    if (static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(ids[i]) + " out of range for " +
                       table.name + " " + tv.shape_string());
    }
    std::copy_n(tv.data().data() + static_cast<std::size_t>(ids[i]) * ch, ch, &out(i, 0));
  }
  std::vector<std::int32_t> rows(ids.begin(), ids.end());
  Parameter* p = &table;
  return g.record_source(std::move(out), table.trainable,
                         [p, ch, rows = std::move(rows)](Graph&, const Tensor& dy) {
    Tensor& dt = p->grad_buffer();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0) continue;
      double* dst = &dt(static_cast<std::size_t>(rows[i]), 0);
      for (std::size_t c = 0; c < ch; ++c) dst[c] += dy(i, c);
    }
  });
}

Var concat_rows(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t ch = g.value(parts[0]).cols();
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& pv = g.value(p);
    require_matrix(pv, "concat_rows");
    if (pv.shape()[1] != ch) {
      throw ShapeError("concat_rows: column mismatch " + g.value(parts[0]).shape_string() +
                       " vs " + pv.shape_string());
    }
    total += pv.rows();
  }
  Tensor out({total, ch});
  std::vector<std::size_t> offsets;
  offsets.reserve(parts.size());
  std::size_t at = 0;
  for (Var p : parts) {
    const Tensor& pv = g.value(p);
    offsets.push_back(at);
    std::copy(pv.data().begin(), pv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(at * ch));
    at += pv.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), parts,
                  [inputs, offsets = std::move(offsets), ch](Graph& gr, const Tensor& dy) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Tensor* dp = gr.grad_buffer(inputs[i]);
      if (!dp) continue;
      const std::size_t base = offsets[i] * ch;
      for (std::size_t j = 0; j < dp->size(); ++j) (*dp)[j] += dy[base + j];
    }
  });
}

Var slice_rows(Graph& g, Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = g.value(x);
  require_matrix(xv, "slice_rows");
  if (begin > end || end > xv.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for " + xv.shape_string());
  }
  const std::size_t ch = xv.shape()[1];
  Tensor out({end - begin, ch});
  std::copy_n(xv.data().begin() + static_cast<std::ptrdiff_t>(begin * ch), (end - begin) * ch,
              out.data().begin());
  return g.record(std::move(out), {x}, [x, begin, ch](Graph& gr, const Tensor& dy) {
    Tensor* dx = gr.grad_buffer(x);
    const std::size_t base = begin * ch;
    for (std::size_t j = 0; j < dy.size(); ++j) (*dx)[base + j] += dy[j];
  });
}

Var stack(Graph& g, std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("stack: no inputs");
  Tensor out({1, scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const Tensor& v = g.value(scalars[i]);
    if (v.size() != 1) throw ShapeError("stack: expected scalars, got " + v.shape_string());
    out[i] = v[0];
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return g.record(std::move(out), scalars, [inputs](Graph& gr, const Tensor& dy) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (Tensor* d = gr.grad_buffer(inputs[i])) (*d)[0] += dy[i];
    }
  });
}

Var pick(Graph& g, Var x, std::size_t index) {
  const Tensor& xv = g.value(x);
  if (index >= xv.size()) {
    throw ShapeError("pick: index " + std::to_string(index) + " out of range for " +
                     xv.shape_string());
  }
  return g.record(Tensor::scalar(xv[index]), {x}, [x, index](Graph& gr, const Tensor& dy) {
    (*gr.grad_buffer(x))[index] += dy[0];
  });
}

Var cosine(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.size() != bv.size() || av.empty()) {
    throw ShapeError("cosine: shape mismatch " + av.shape_string() + " vs " + bv.shape_string());
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na += av[i] * av[i];
    nb += bv[i] * bv[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  const bool degenerate = na == 0.0 || nb == 0.0;
  const double c = degenerate ? 0.0 : dot / (na * nb);
  return g.record(Tensor::scalar(c), {a, b},
                  [a, b, na, nb, c, degenerate](Graph& gr, const Tensor& dy) {
    if (degenerate) return;
    const Tensor& av = gr.value(a);
    const Tensor& bv = gr.value(b);
    const double s = dy[0];
    if (Tensor* da = gr.grad_buffer(a)) {
      for (std::size_t i = 0; i < av.size(); ++i)
        (*da)[i] += s * (bv[i] / (na * nb) - c * av[i] / (na * na));
    }
    if (Tensor* db = gr.grad_buffer(b)) {
      for (std::size_t i = 0; i < bv.size(); ++i)
        (*db)[i] += s * (av[i] / (na * nb) - c * bv[i] / (nb * nb));
    }
  });
}

}  // namespace conmask::nk
