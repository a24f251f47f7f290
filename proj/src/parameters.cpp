#include "dnl/parameters.hpp"

#include <cmath>

#include "dnl/errors.hpp"

namespace dnl {

void ParameterStore::add(const std::string& name, Tensor value) {
  if (!values_.emplace(name, std::move(value)).second) {
    throw ConfigError("parameter '" + name + "' defined twice");
  }
}

void ParameterStore::add_he(const std::string& name, Shape shape, std::size_t fan_in,
                            std::mt19937_64& rng) {
  add(name, Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / static_cast<double>(fan_in))));
}

void ParameterStore::add_batchnorm(const std::string& prefix, std::size_t channels) {
  add(prefix + ".gamma", Tensor({channels}, 1.0));
  add(prefix + ".beta", Tensor({channels}, 0.0));
  batchnorms_.emplace(prefix, BatchNormState(channels));
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

BatchNormState& ParameterStore::batchnorm(const std::string& prefix) {
  auto it = batchnorms_.find(prefix);
  if (it == batchnorms_.end()) throw ConfigError("unknown batchnorm '" + prefix + "'");
  return it->second;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : values_) n += t.size();
  return n;
}

TensorMap ParameterStore::state() const {
  TensorMap out = values_;
  for (const auto& [prefix, bn] : batchnorms_) {
    out.emplace(prefix + ".running_mean", bn.running_mean);
    out.emplace(prefix + ".running_var", bn.running_var);
  }
  return out;
}

void ParameterStore::load_state(const TensorMap& state) {
  auto assign = [](Tensor& dst, const Tensor& src, const std::string& name) {
    if (dst.shape() != src.shape()) {
      throw ShapeError("checkpoint tensor '" + name + "' has shape " +
                       shape_string(src.shape()) + ", model expects " +
                       shape_string(dst.shape()));
    }
    dst = src;
  };
  std::size_t used = 0;
  for (auto& [name, t] : values_) {
    auto it = state.find(name);
    if (it == state.end()) throw IoError("checkpoint is missing tensor '" + name + "'");
    assign(t, it->second, name);
    ++used;
  }
  for (auto& [prefix, bn] : batchnorms_) {
    for (auto [suffix, dst] : {std::pair{".running_mean", &bn.running_mean},
                               std::pair{".running_var", &bn.running_var}}) {
      const std::string name = prefix + suffix;
      auto it = state.find(name);
      if (it == state.end()) throw IoError("checkpoint is missing tensor '" + name + "'");
      assign(*dst, it->second, name);
      ++used;
    }
  }
  if (used != state.size()) {
    for (const auto& [name, t] : state) {
      const bool known = values_.count(name) > 0 ||
                         [&] {
                           for (const auto& [prefix, bn] : batchnorms_) {
                             if (name == prefix + ".running_mean" ||
                                 name == prefix + ".running_var")
                               return true;
                           }
                           return false;
                         }();
      if (!known) throw IoError("checkpoint has unexpected tensor '" + name + "'");
    }
  }
}

Var Binder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = graph_.parameter(name, store_.at(name));
  bound_.emplace(name, v);
  return v;
}

}  // namespace dnl
