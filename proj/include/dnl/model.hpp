#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dnl/attention.hpp"
#include "dnl/extractors.hpp"

namespace dnl {

/// Paired HSI / LiDAR patches with 0-based class indices.
struct Batch {
  Tensor hsi;    // [N, bands, p, p]
  Tensor lidar;  // [N, 1, p, p]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct ModelConfig {
  ExtractorConfig extractor;
  AttentionConfig attention;
  std::size_t classes = 2;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Extractors -> attention -> global average pool -> linear head.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  /// Only the maps the wiring reads are computed; the others stay invalid.
  FeatureMaps features(Binder& bind, const Batch& batch, Mode mode) const;
  /// Class logits [N, classes].
  Var forward(Binder& bind, const Batch& batch, Mode mode) const;
  /// Eval-mode argmax per sample; ties go to the lowest class index.
  std::vector<int> predict(const Batch& batch);

 private:
  ModelConfig config_;
  ParameterStore params_;
};

/// Index of the largest entry of each row of [N, K]; lowest index on ties.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace dnl
