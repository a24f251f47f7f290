#include "dnl/extractors.hpp"

#include "dnl/errors.hpp"

namespace dnl {

void ExtractorConfig::validate() const {
  if (hsi_bands == 0) throw ConfigError("extractor.hsi_bands must be positive");
  if (patch_size == 0 || patch_size % 2 == 0) {
    throw ConfigError("extractor.patch_size must be odd, got " + std::to_string(patch_size));
  }
  if (patch_size < 3) throw ConfigError("extractor.patch_size must be at least 3");
  if (feature_channels == 0 || feature_channels % 4 != 0) {
    throw ConfigError("extractor.feature_channels must be a positive multiple of 4, got " +
                      std::to_string(feature_channels));
  }
  if (lidar_layers == 0) throw ConfigError("extractor.lidar_layers must be positive");
}

}  // namespace dnl

namespace dnl::extractors {
namespace {

constexpr std::size_t kScales[4] = {1, 3, 5, 7};

// Convolutions feeding batch normalization carry no bias.
void add_conv(ParameterStore& store, const std::string& prefix, std::size_t out,
              std::size_t in, std::size_t k, std::mt19937_64& rng, bool bias) {
  store.add_he(prefix + ".w", {out, in, k, k}, in * k * k, rng);
  if (bias) store.add(prefix + ".b", Tensor({out}, 0.0));
}

Var conv(Binder& bind, const std::string& prefix, Var x, std::size_t pad) {
  const std::string bias = prefix + ".b";
  return ops::conv2d(x, bind(prefix + ".w"), bind.has(bias) ? bind(bias) : Var{}, 1, pad);
}

Var bn(Binder& bind, const std::string& prefix, Var x, Mode mode) {
  return ops::batchnorm(x, bind(prefix + ".gamma"), bind(prefix + ".beta"),
                        bind.batchnorm(prefix), mode);
}

void expect_channels(Var x, std::size_t channels, const char* what) {
  if (x.value().rank() != 4 || x.shape()[1] != channels) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(channels) +
                     " input channels, got shape " + shape_string(x.shape()));
  }
}

}  // namespace

void init_residual_block(ParameterStore& store, const std::string& prefix,
                         std::size_t channels, std::mt19937_64& rng) {
  if (channels % 4 != 0) {
    throw ConfigError("residual block '" + prefix + "' needs channels divisible by 4, got " +
                      std::to_string(channels));
  }
  const std::size_t group = channels / 4;
  for (std::size_t k : kScales) {
    store.add_he(prefix + ".dw" + std::to_string(k), {group, 1, k, k}, k * k, rng);
  }
  add_conv(store, prefix + ".pw", channels, channels, 1, rng, false);
  store.add_batchnorm(prefix + ".bn", channels);
}

void init_params(ParameterStore& store, const ExtractorConfig& config,
                 std::mt19937_64& rng) {
  config.validate();
  const std::size_t C = config.feature_channels;
  add_conv(store, "hsi.proj", C, config.hsi_bands, 1, rng, true);
  for (std::size_t i = 0; i < config.residual_blocks; ++i) {
    init_residual_block(store, "hsi.block" + std::to_string(i), C, rng);
  }
  for (std::size_t i = 0; i < config.lidar_layers; ++i) {
    const std::string prefix = "lidar.layer" + std::to_string(i);
    add_conv(store, prefix + ".conv", C, i == 0 ? 1 : C, 3, rng, false);
    store.add_batchnorm(prefix + ".bn", C);
  }
  add_conv(store, "fuse.conv0", C, C, 3, rng, false);
  store.add_batchnorm("fuse.bn0", C);
  add_conv(store, "fuse.conv1", C, C, 3, rng, true);
}

Var residual_block(Binder& bind, const std::string& prefix, Var x, Mode mode) {
  const std::array<Var, 4> kernels{bind(prefix + ".dw1"), bind(prefix + ".dw3"),
                                   bind(prefix + ".dw5"), bind(prefix + ".dw7")};
  expect_channels(x, kernels[0].shape()[0] * 4, "residual_block");
  Var f = ops::depthwise_multiscale_conv(x, kernels);
  f = conv(bind, prefix + ".pw", f, 0);
  f = bn(bind, prefix + ".bn", f, mode);
  return ops::relu(ops::add(f, x));
}

Var extract_hsi(Binder& bind, const ExtractorConfig& config, Var patch, Mode mode) {
  if (patch.value().rank() != 4 || patch.shape()[1] != config.hsi_bands) {
    throw ShapeError("extract_hsi: expected " + std::to_string(config.hsi_bands) +
                     " spectral bands, got patch shape " + shape_string(patch.shape()));
  }
  Var h = conv(bind, "hsi.proj", patch, 0);
  for (std::size_t i = 0; i < config.residual_blocks; ++i) {
    h = residual_block(bind, "hsi.block" + std::to_string(i), h, mode);
  }
  return h;
}

Var extract_lidar(Binder& bind, const ExtractorConfig& config, Var patch, Mode mode) {
  if (patch.value().rank() != 4 || patch.shape()[1] != 1) {
    throw ShapeError("extract_lidar: expected a single-channel elevation patch, got shape " +
                     shape_string(patch.shape()));
  }
  Var l = patch;
  for (std::size_t i = 0; i < config.lidar_layers; ++i) {
    const std::string prefix = "lidar.layer" + std::to_string(i);
    l = conv(bind, prefix + ".conv", l, 1);
    l = bn(bind, prefix + ".bn", l, mode);
    l = ops::relu(l);
  }
  return l;
}

Var fuse(Binder& bind, Var hsi_features, Var lidar_features, Mode mode) {
  if (hsi_features.shape() != lidar_features.shape()) {
    throw ShapeError("fuse: HSI features " + shape_string(hsi_features.shape()) +
                     " and LiDAR features " + shape_string(lidar_features.shape()) +
                     " differ in shape");
  }
  const std::size_t height = hsi_features.shape()[2], width = hsi_features.shape()[3];
  Var s = ops::add(hsi_features, lidar_features);
  s = ops::avgpool2d(s, 2, 2);
  s = ops::upsample_nearest(s, 2, height, width);
  s = conv(bind, "fuse.conv0", s, 1);
  s = ops::relu(bn(bind, "fuse.bn0", s, mode));
  return conv(bind, "fuse.conv1", s, 1);
}

}  // namespace dnl::extractors
