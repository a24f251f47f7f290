#pragma once

// HSI, LiDAR and fused feature extraction.
//
// All three extractors emit [N, feature_channels, p, p] maps so that H, L
// and F can be mixed freely by the attention wiring.

#include <cstddef>
#include <random>
#include <string>

#include "dnl/parameters.hpp"

namespace dnl {

struct ExtractorConfig {
  std::size_t hsi_bands = 144;
  std::size_t patch_size = 11;
  std::size_t feature_channels = 64;
  std::size_t residual_blocks = 2;
  std::size_t lidar_layers = 3;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  friend bool operator==(const ExtractorConfig&, const ExtractorConfig&) = default;
};

}  // namespace dnl

namespace dnl::extractors {

void init_residual_block(ParameterStore& store, const std::string& prefix,
                         std::size_t channels, std::mt19937_64& rng);
/// Registers every extractor parameter under "hsi.", "lidar." and "fuse.".
void init_params(ParameterStore& store, const ExtractorConfig& config,
                 std::mt19937_64& rng);

/// relu(f(X) + X) with f = batchnorm(conv1x1(depthwise_multiscale_conv(X))).
Var residual_block(Binder& bind, const std::string& prefix, Var x, Mode mode);

/// patch [N, hsi_bands, p, p]: 1x1 projection to feature_channels followed by
/// residual_blocks residual blocks.
Var extract_hsi(Binder& bind, const ExtractorConfig& config, Var patch, Mode mode);

/// patch [N, 1, p, p]: lidar_layers stages of conv3x3 -> batchnorm -> relu.
Var extract_lidar(Binder& bind, const ExtractorConfig& config, Var patch, Mode mode);

/// F = conv3x3(relu(batchnorm(conv3x3(upsample(avgpool(H + L)))))), where the
/// 2x2 average pool is undone by nearest-neighbour upsampling back to p x p.
Var fuse(Binder& bind, Var hsi_features, Var lidar_features, Mode mode);

}  // namespace dnl::extractors
