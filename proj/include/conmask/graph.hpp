#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "conmask/random.hpp"
#include "conmask/tensor.hpp"

namespace conmask::nk {

enum class Mode { kTrain, kInfer };

// A named trainable tensor. Gradients from every graph that reads the
// parameter accumulate into `grad` until zero_grad() is called.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {}

  void zero_grad();
  // Allocates `grad` with the value's shape if it is not allocated yet.
  Tensor& grad_buffer();
};

// Handle to a node of a Graph.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// order is a topological order and the graph is acyclic by construction.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(Mode mode = Mode::kInfer, std::uint64_t seed = 0);

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::kTrain; }
  Rng& rng() { return rng_; }

  Var constant(Tensor value);
  Var parameter(Parameter& p);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() root with respect to v; zeros if v did
  // not influence the root.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Propagates d(root)/d(node) to every node that requires a gradient and
  // accumulates parameter gradients into Parameter::grad. root must be 1x1.
  void backward(Var root);

  // Op implementation interface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  // Node with no graph inputs whose backward writes somewhere external,
  // e.g. scattering rows into an embedding table's gradient.
  Var record_source(Tensor value, bool requires_grad, BackwardFn fn);
  // Adds g into the gradient buffer of v (no-op when v needs no gradient).
  void accumulate(Var v, const Tensor& g);
  // Mutable gradient buffer of v, allocated on first use. Null when v needs
  // no gradient.
  Tensor* grad_buffer(Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  Mode mode_;
  Rng rng_;
  std::vector<Node> nodes_;
};

}  // namespace conmask::nk
