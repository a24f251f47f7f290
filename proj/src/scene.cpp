#include "dnl/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dnl/errors.hpp"

namespace dnl {
namespace {

// Blocks per side of the label tiling.
std::size_t tiles_per_side(std::size_t classes) {
  return std::max<std::size_t>(4, static_cast<std::size_t>(std::ceil(std::sqrt(double(classes)))));
}

}  // namespace

void SceneSpec::validate() const {
  if (classes < 2) throw ConfigError("scene.classes must be at least 2");
  if (classes > 255) throw ConfigError("scene.classes must be at most 255");
  if (bands < 4) throw ConfigError("scene.bands must be at least 4");
  const std::size_t min_side = std::max<std::size_t>(8, tiles_per_side(classes));
  if (height < min_side || width < min_side) {
    throw ConfigError("scene.height and scene.width must be at least " + std::to_string(min_side) +
                      " for " + std::to_string(classes) + " classes");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("scene.noise_sigma must be non-negative");
}

std::size_t spectral_group(std::size_t c) { return c < 4 ? c / 2 : c - 2; }

std::size_t elevation_group(std::size_t c) { return c < 4 ? c % 2 : c / 2; }

SceneData synth_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t H = spec.height, W = spec.width, K = spec.classes;

  // Label layout: a balanced tiling of square blocks, then rectangles smaller
  // than a block pasted on top so no class can be erased.
  LabelRaster labels(W, H);
  const std::size_t block = std::min(H, W) / tiles_per_side(K);
  const std::size_t by = (H + block - 1) / block, bx = (W + block - 1) / block;
  std::vector<int> block_class(by * bx);
  for (std::size_t i = 0; i < block_class.size(); ++i) block_class[i] = static_cast<int>(i % K) + 1;
  std::shuffle(block_class.begin(), block_class.end(), rng);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      labels.at(r, c) = static_cast<std::int16_t>(block_class[(r / block) * bx + c / block]);

  if (block >= 3) {
    std::uniform_int_distribution<std::size_t> pick_class(1, K);
    std::uniform_int_distribution<std::size_t> side(std::max<std::size_t>(2, block / 3), block - 1);
    const std::size_t rects = std::max(K, by * bx / 2);
    for (std::size_t i = 0; i < rects; ++i) {
      const std::size_t rh = side(rng), rw = side(rng);
      const std::size_t r0 = std::uniform_int_distribution<std::size_t>(0, H - rh)(rng);
      const std::size_t c0 = std::uniform_int_distribution<std::size_t>(0, W - rw)(rng);
      const auto id = static_cast<std::int16_t>(pick_class(rng));
      for (std::size_t r = r0; r < r0 + rh; ++r)
        for (std::size_t c = c0; c < c0 + rw; ++c) labels.at(r, c) = id;
    }
  }

  // Spectral signatures: smooth curves built from a few Gaussian bumps.
  const std::size_t groups = spectral_group(K - 1) + 1;
  std::vector<std::vector<double>> signatures(groups, std::vector<double>(spec.bands));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& sig : signatures) {
    const double base = 0.2 + 0.3 * unit(rng);
    std::fill(sig.begin(), sig.end(), base);
    for (int bump = 0; bump < 3; ++bump) {
      const double centre = unit(rng) * static_cast<double>(spec.bands - 1);
      const double width = 1.0 + unit(rng) * static_cast<double>(spec.bands) / 4.0;
      const double height = 0.6 * (unit(rng) - 0.3);
      for (std::size_t b = 0; b < spec.bands; ++b) {
        const double d = (static_cast<double>(b) - centre) / width;
        sig[b] += height * std::exp(-0.5 * d * d);
      }
    }
  }

  SceneData scene{Raster(W, H, spec.bands), Raster(W, H, 1), std::move(labels)};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t b = 0; b < spec.bands; ++b)
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t c = 0; c < W; ++c) {
        const auto k = static_cast<std::size_t>(scene.labels.at(r, c) - 1);
        const double v = signatures[spectral_group(k)][b] + spec.noise_sigma * noise(rng);
        scene.hsi.at(b, r, c) = static_cast<float>(v);
      }
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const auto k = static_cast<std::size_t>(scene.labels.at(r, c) - 1);
      const double v = static_cast<double>(elevation_group(k)) + spec.noise_sigma * noise(rng);
      scene.lidar.at(0, r, c) = static_cast<float>(v);
    }
  return scene;
}

}  // namespace dnl
