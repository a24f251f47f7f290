#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnl/model.hpp"
#include "dnl/raster.hpp"

namespace dnl {

/// Co-registered HSI cube, LiDAR elevation and labels.
struct SceneData {
  Raster hsi;
  Raster lidar;
  LabelRaster labels;
};

/// Checks that the three rasters share one grid and LiDAR has one band.
void validate_scene(const SceneData& scene);

/// Per-band z-scoring over all pixels (bands with zero variance are only
/// centred). Applied to HSI and LiDAR before patches are cut.
void normalize_bands(Raster& raster);

struct PixelSample {
  std::size_t row = 0;
  std::size_t col = 0;
  int label = 0;  // 1-based class id from the label raster

  friend bool operator==(const PixelSample&, const PixelSample&) = default;
};

enum class Split { train, test };

/// Requested per-class sample counts; index i is class id i + 1. A missing
/// test count means "every remaining labeled pixel of that class".
struct ClassCounts {
  std::vector<std::size_t> train;
  std::vector<std::optional<std::size_t>> test;

  static ClassCounts uniform(std::size_t classes, std::size_t train, std::size_t test);
  std::size_t classes() const { return train.size(); }
};

/// Train/test pixel samples over a shared scene. Patches are cut on demand
/// with reflect padding at the raster borders.
class PatchDataset {
 public:
  PatchDataset(std::shared_ptr<const SceneData> scene, std::size_t patch_size,
               std::size_t classes, std::vector<PixelSample> train,
               std::vector<PixelSample> test);

  const std::vector<PixelSample>& samples(Split split) const {
    return split == Split::train ? train_ : test_;
  }
  std::size_t classes() const { return classes_; }
  std::size_t patch_size() const { return patch_size_; }
  std::size_t bands() const { return scene_->hsi.bands; }
  const SceneData& scene() const { return *scene_; }

  /// Labels in the batch are 0-based (class id - 1).
  Batch make_batch(std::span<const PixelSample> samples) const;
  Batch make_batch(Split split, std::span<const std::size_t> indices) const;
  /// Per-class sample counts of one split (index = class id - 1).
  std::vector<std::size_t> class_counts(Split split) const;

 private:
  std::shared_ptr<const SceneData> scene_;
  std::size_t patch_size_;
  std::size_t classes_;
  std::vector<PixelSample> train_;
  std::vector<PixelSample> test_;
};

/// Reflect-101 index into [0, n): -1 -> 1, n -> n - 2.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

/// Seeded sampling without replacement, independently per class. Pixels of
/// each class are shuffled once; the first train[c] go to train, the next
/// test[c] to test. Label 0 is never sampled.
PatchDataset sample_patches(std::shared_ptr<const SceneData> scene, std::size_t patch_size,
                            const ClassCounts& counts, std::uint64_t seed);

/// Houston 2013 class names and per-class train / test counts.
const std::vector<std::string>& houston_class_names();
ClassCounts houston_counts();

}  // namespace dnl
