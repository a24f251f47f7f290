#pragma once

// Synthetic HSI + LiDAR scenes in which neither modality alone separates
// every class.
//
// Classes are grouped twice. Spectral groups: {1, 2} and {3, 4} share one
// signature each, every other class has its own. Elevation groups: {1, 3},
// {2, 4}, {5, 6}, {7, 8}, ... share one height level. Each class is the
// unique (spectral group, elevation group) pair, so fusing both modalities
// identifies it while spectra alone confuse two pairs and elevation alone
// confuses every class with its partner.

#include <cstddef>
#include <cstdint>

#include "dnl/dataset.hpp"

namespace dnl {

struct SceneSpec {
  std::size_t classes = 6;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 16;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// 0-based spectral / elevation group of a 0-based class index.
std::size_t spectral_group(std::size_t class_index);
std::size_t elevation_group(std::size_t class_index);

/// Piecewise-constant label layout (block tiling overpainted with random
/// rectangles, every pixel labeled), per-class spectra plus Gaussian noise,
/// and per-class elevation plus Gaussian noise. Deterministic in the seed.
SceneData synth_scene(const SceneSpec& spec);

}  // namespace dnl
