#include "conmask/graph.hpp"

#include "conmask/error.hpp"

namespace conmask::nk {

void Parameter::zero_grad() {
  if (grad.same_shape(value)) {
    grad.fill(0.0);
  } else {
    grad = Tensor(value.shape());
  }
}

Tensor& Parameter::grad_buffer() {
  if (!grad.same_shape(value)) grad = Tensor(value.shape());
  return grad;
}

Graph::Graph(Mode mode, std::uint64_t seed) : mode_(mode), rng_(seed) {}

const Graph::Node& Graph::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error("invalid graph handle " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Graph::Node& Graph::node(Var v) {
  return const_cast<Node&>(static_cast<const Graph*>(this)->node(v));
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = p.trainable;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.same_shape(n.value)) return n.grad;
  return Tensor(n.value.shape());
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::record_source(Tensor value, bool requires_grad, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor* Graph::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (!n.grad.same_shape(n.value)) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

void Graph::accumulate(Var v, const Tensor& g) {
  if (Tensor* buf = grad_buffer(v)) buf->add_inplace(g);
}

void Graph::backward(Var root) {
  Node& r = node(root);
  if (r.value.size() != 1) {
    throw ShapeError("backward needs a scalar root, got " + r.value.shape_string());
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad = Tensor();
  }
  if (!r.requires_grad) return;
  r.grad = Tensor(r.value.shape(), 1.0);
  for (std::size_t i = static_cast<std::size_t>(root.id) + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.grad.same_shape(n.value)) continue;
    if (n.param != nullptr) {
      n.param->grad_buffer().add_inplace(n.grad);
    } else if (n.backward) {
      // The callback may allocate sibling gradient buffers but never appends
      // nodes, so the reference stays valid.
      n.backward(*this, n.grad);
    }
  }
}

}  // namespace conmask::nk
