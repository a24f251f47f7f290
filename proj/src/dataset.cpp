#include "dnl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dnl/errors.hpp"

namespace dnl {

void validate_scene(const SceneData& scene) {
  const auto& h = scene.hsi;
  const auto& l = scene.lidar;
  const auto& y = scene.labels;
  if (l.bands != 1) {
    throw ShapeError("LiDAR raster must have one band, got " + std::to_string(l.bands));
  }
  if (h.width != l.width || h.height != l.height || h.width != y.width ||
      h.height != y.height) {
    throw ShapeError("HSI " + std::to_string(h.width) + "x" + std::to_string(h.height) +
                     ", LiDAR " + std::to_string(l.width) + "x" + std::to_string(l.height) +
                     " and labels " + std::to_string(y.width) + "x" + std::to_string(y.height) +
                     " must share one grid");
  }
}

void normalize_bands(Raster& raster) {
  const std::size_t plane = raster.width * raster.height;
  for (std::size_t b = 0; b < raster.bands; ++b) {
    float* p = raster.values.data() + b * plane;
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    const double mean = s / static_cast<double>(plane);
    double ss = 0.0;
    for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mean) * (p[i] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(plane));
    const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<float>((p[i] - mean) * inv);
  }
}

ClassCounts ClassCounts::uniform(std::size_t classes, std::size_t train, std::size_t test) {
  ClassCounts c;
  c.train.assign(classes, train);
  c.test.assign(classes, test);
  return c;
}

PatchDataset::PatchDataset(std::shared_ptr<const SceneData> scene, std::size_t patch_size,
                           std::size_t classes, std::vector<PixelSample> train,
                           std::vector<PixelSample> test)
    : scene_(std::move(scene)),
      patch_size_(patch_size),
      classes_(classes),
      train_(std::move(train)),
      test_(std::move(test)) {
  validate_scene(*scene_);
  if (patch_size_ % 2 == 0) throw ConfigError("patch size must be odd");
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto len = static_cast<std::ptrdiff_t>(n);
  const std::ptrdiff_t period = 2 * (len - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < len ? i : period - i);
}

Batch PatchDataset::make_batch(std::span<const PixelSample> samples) const {
  const std::size_t N = samples.size(), p = patch_size_, B = scene_->hsi.bands;
  const std::size_t W = scene_->hsi.width, H = scene_->hsi.height;
  const auto half = static_cast<std::ptrdiff_t>(p / 2);
  Batch batch{Tensor({N, B, p, p}), Tensor({N, 1, p, p}), std::vector<int>(N)};
  std::vector<std::size_t> rows(p), cols(p);
  for (std::size_t n = 0; n < N; ++n) {
    const PixelSample& s = samples[n];
    for (std::size_t i = 0; i < p; ++i) {
      rows[i] = reflect_index(static_cast<std::ptrdiff_t>(s.row) - half + static_cast<std::ptrdiff_t>(i), H);
      cols[i] = reflect_index(static_cast<std::ptrdiff_t>(s.col) - half + static_cast<std::ptrdiff_t>(i), W);
    }
    for (std::size_t b = 0; b < B; ++b) {
      double* dst = batch.hsi.data().data() + (n * B + b) * p * p;
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x) dst[y * p + x] = scene_->hsi.at(b, rows[y], cols[x]);
    }
    double* dst = batch.lidar.data().data() + n * p * p;
    for (std::size_t y = 0; y < p; ++y)
      for (std::size_t x = 0; x < p; ++x) dst[y * p + x] = scene_->lidar.at(0, rows[y], cols[x]);
    batch.labels[n] = s.label - 1;
  }
  return batch;
}

Batch PatchDataset::make_batch(Split split, std::span<const std::size_t> indices) const {
  const auto& all = samples(split);
  std::vector<PixelSample> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(all.at(i));
  return make_batch(picked);
}

std::vector<std::size_t> PatchDataset::class_counts(Split split) const {
  std::vector<std::size_t> counts(classes_, 0);
  for (const PixelSample& s : samples(split)) ++counts[static_cast<std::size_t>(s.label - 1)];
  return counts;
}

PatchDataset sample_patches(std::shared_ptr<const SceneData> scene, std::size_t patch_size,
                            const ClassCounts& counts, std::uint64_t seed) {
  validate_scene(*scene);
  const std::size_t classes = counts.classes();
  if (classes < 2) throw ConfigError("sampling needs counts for at least 2 classes");
  if (counts.test.size() != classes) {
    throw ConfigError("train counts list " + std::to_string(classes) +
                      " classes but test counts list " + std::to_string(counts.test.size()));
  }
  const LabelRaster& labels = scene->labels;
  std::vector<std::vector<PixelSample>> by_class(classes);
  for (std::size_t r = 0; r < labels.height; ++r) {
    for (std::size_t c = 0; c < labels.width; ++c) {
      const int id = labels.at(r, c);
      if (id == 0) continue;
      if (id < 0 || static_cast<std::size_t>(id) > classes) {
        throw ConfigError("label raster contains class " + std::to_string(id) +
                          " but counts cover classes 1.." + std::to_string(classes));
      }
      by_class[static_cast<std::size_t>(id - 1)].push_back({r, c, id});
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<PixelSample> train, test;
  for (std::size_t k = 0; k < classes; ++k) {
    auto& pool = by_class[k];
    const std::size_t want_train = counts.train[k];
    const std::size_t want_test =
        counts.test[k].has_value() ? *counts.test[k]
                                   : (pool.size() > want_train ? pool.size() - want_train : 0);
    if (want_train + want_test > pool.size()) {
      throw ConfigError("class " + std::to_string(k + 1) + " has " +
                        std::to_string(pool.size()) + " labeled pixels but " +
                        std::to_string(want_train) + " train + " + std::to_string(want_test) +
                        " test were requested");
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    train.insert(train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want_train));
    test.insert(test.end(), pool.begin() + static_cast<std::ptrdiff_t>(want_train),
                pool.begin() + static_cast<std::ptrdiff_t>(want_train + want_test));
  }
  return PatchDataset(std::move(scene), patch_size, classes, std::move(train), std::move(test));
}

const std::vector<std::string>& houston_class_names() {
  static const std::vector<std::string> names{
      "Health grass", "Stressed grass", "Synthetic grass", "Trees",         "Soil",
      "Water",        "Residential",    "Commercial",      "Road",          "Highway",
      "Railway",      "Parking lot 1",  "Parking lot 2",   "Tennis court",  "Running track"};
  return names;
}

ClassCounts houston_counts() {
  ClassCounts c;
  c.train = {198, 190, 192, 188, 186, 182, 196, 191, 193, 191, 181, 192, 184, 181, 187};
  for (std::size_t t : {1053, 1064, 505, 1056, 1056, 143, 1072, 1036, 1059, 1036, 1054, 1041,
                        285, 247, 473}) {
    c.test.emplace_back(t);
  }
  return c;
}

}  // namespace dnl
