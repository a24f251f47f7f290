#pragma once

#include <map>
#include <random>
#include <string>

#include "dnl/checkpoint.hpp"
#include "dnl/graph.hpp"
#include "dnl/ops.hpp"

namespace dnl {

/// Named trainable tensors plus the batch-norm running statistics of a model.
class ParameterStore {
 public:
  void add(const std::string& name, Tensor value);
  /// He-normal conv/linear weights: stddev sqrt(2 / fan_in).
  void add_he(const std::string& name, Shape shape, std::size_t fan_in,
              std::mt19937_64& rng);
  void add_batchnorm(const std::string& prefix, std::size_t channels);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  BatchNormState& batchnorm(const std::string& prefix);
  bool contains(const std::string& name) const { return values_.count(name) > 0; }

  TensorMap& values() { return values_; }
  const TensorMap& values() const { return values_; }
  std::size_t parameter_count() const;

  /// Parameters plus "<prefix>.running_mean" / "<prefix>.running_var".
  TensorMap state() const;
  /// Inverse of state(); every name must already exist with the same shape.
  void load_state(const TensorMap& state);

 private:
  TensorMap values_;
  std::map<std::string, BatchNormState> batchnorms_;
};

/// Binds store entries into one graph as parameter leaves on first use.
class Binder {
 public:
  Binder(Graph& graph, ParameterStore& store) : graph_(graph), store_(store) {}

  Var operator()(const std::string& name);
  bool has(const std::string& name) const { return store_.contains(name); }
  BatchNormState& batchnorm(const std::string& prefix) { return store_.batchnorm(prefix); }
  Graph& graph() { return graph_; }

 private:
  Graph& graph_;
  ParameterStore& store_;
  std::map<std::string, Var> bound_;
};

}  // namespace dnl
