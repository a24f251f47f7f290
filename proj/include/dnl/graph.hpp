#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnl/tensor.hpp"

namespace dnl {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

using Gradients = std::map<std::string, Tensor>;

/// Reverse-mode tape. Nodes are appended in evaluation order, so the append
/// order is a topological order and backward() walks it in reverse.
class Graph {
 public:
  /// Called during backward() with the graph and the node's output gradient;
  /// it adds its contribution to the gradients of the node's inputs.
  using BackwardFn = std::function<void(Graph&, const Tensor&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Trainable leaf; names must be unique within one graph.
  Var parameter(const std::string& name, Tensor value);
  /// Appends a computed node. `backward` is dropped when no input needs a
  /// gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id()); }

  /// Gradient buffer of a node, zero-initialised on first use.
  Tensor& grad(std::size_t id);
  Tensor& grad(Var v) { return grad(v.id()); }
  /// Gradient after backward(); nullopt when nothing flowed into the node.
  std::optional<Tensor> gradient(Var v) const;

  /// Reverse pass from a scalar (single-element) loss.
  void backward(Var loss);

  Gradients parameter_gradients() const;
  std::optional<Var> find_parameter(const std::string& name);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> parameters_;
};

}  // namespace dnl
