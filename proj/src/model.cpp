#include "dnl/model.hpp"

#include <random>

#include "dnl/errors.hpp"

namespace dnl {

void ModelConfig::validate() const {
  extractor.validate();
  if (classes < 2) throw ConfigError("model needs at least 2 classes");
  if (attention.embed_channels == 0) {
    throw ConfigError("attention.embed_channels must be positive");
  }
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t C = config_.extractor.feature_channels;
  extractors::init_params(params_, config_.extractor, rng);
  attention::init_params(params_, C, config_.attention.embed_channels, rng);
  params_.add_he("head.w", {config_.classes, C}, C, rng);
  params_.add("head.b", Tensor({config_.classes}, 0.0));
}

FeatureMaps Model::features(Binder& bind, const Batch& batch, Mode mode) const {
  const WiringConfig& w = config_.attention.wiring;
  bool need[3] = {false, false, false};
  for (Source s : {w.value, w.key, w.query, w.unary}) need[static_cast<int>(s)] = true;
  if (config_.attention.type == AttentionType::nl) {
    // NL ignores the unary branch.
    need[0] = need[1] = need[2] = false;
    for (Source s : {w.value, w.key, w.query}) need[static_cast<int>(s)] = true;
  }
  const bool want_f = need[static_cast<int>(Source::F)];
  const bool want_h = want_f || need[static_cast<int>(Source::H)];
  const bool want_l = want_f || need[static_cast<int>(Source::L)];

  Graph& g = bind.graph();
  FeatureMaps maps;
  if (want_h) maps.hsi = extractors::extract_hsi(bind, config_.extractor, g.constant(batch.hsi), mode);
  if (want_l) {
    maps.lidar = extractors::extract_lidar(bind, config_.extractor, g.constant(batch.lidar), mode);
  }
  if (want_f) maps.fused = extractors::fuse(bind, maps.hsi, maps.lidar, mode);
  return maps;
}

Var Model::forward(Binder& bind, const Batch& batch, Mode mode) const {
  const FeatureMaps maps = features(bind, batch, mode);
  const Var attended = attention::forward(bind, maps, config_.attention);
  return ops::linear(ops::global_avg_pool(attended), bind("head.w"), bind("head.b"));
}

std::vector<int> Model::predict(const Batch& batch) {
  Graph g;
  Binder bind(g, params_);
  return argmax_rows(forward(bind, batch, Mode::eval).value());
}

std::vector<int> argmax_rows(const Tensor& logits) {
  expect_rank(logits, 2, "argmax_rows");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  std::vector<int> out(N, 0);
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (logits[n * K + k] > logits[n * K + best]) best = k;
    }
    out[n] = static_cast<int>(best);
  }
  return out;
}

}  // namespace dnl
