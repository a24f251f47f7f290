#include "dnl/graph.hpp"

#include "dnl/errors.hpp"

namespace dnl {

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(const std::string& name, Tensor value) {
  if (parameters_.count(name)) {
    throw ConfigError("parameter '" + name + "' registered twice");
  }
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  parameters_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs,
                  BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || requires_grad(v.id());
  nodes_.push_back(Node{std::move(value), {},
                        needs ? std::move(backward) : BackwardFn{}, needs});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, const std::vector<Var>& inputs,
                  BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || requires_grad(v.id());
  nodes_.push_back(Node{std::move(value), {},
                        needs ? std::move(backward) : BackwardFn{}, needs});
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

std::optional<Tensor> Graph::gradient(Var v) const {
  const Node& node = nodes_.at(v.id());
  if (node.grad.empty()) return std::nullopt;
  return node.grad;
}

void Graph::backward(Var loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     shape_string(loss.shape()));
  }
  if (!requires_grad(loss.id())) return;
  grad(loss.id()).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    // No nodes are appended during the reverse pass, so `node` stays valid.
    node.backward(*this, node.grad);
  }
}

Gradients Graph::parameter_gradients() const {
  Gradients out;
  for (const auto& [name, id] : parameters_) {
    const Node& node = nodes_[id];
    out.emplace(name, node.grad.empty() ? Tensor(node.value.shape()) : node.grad);
  }
  return out;
}

std::optional<Var> Graph::find_parameter(const std::string& name) {
  auto it = parameters_.find(name);
  if (it == parameters_.end()) return std::nullopt;
  return Var(this, it->second);
}

}  // namespace dnl
