#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnl/attention.hpp"
#include "dnl/extractors.hpp"
#include "dnl/scene.hpp"
#include "dnl/train.hpp"

namespace dnl {

/// Raster files plus per-class sample counts.
struct FileSource {
  std::string hsi;
  std::string lidar;
  std::string labels;
  std::vector<std::size_t> train_counts;
  std::vector<std::optional<std::size_t>> test_counts;  // nullopt = all remaining pixels
  std::vector<std::string> class_names;
  friend bool operator==(const FileSource&, const FileSource&) = default;
};

struct SamplingConfig {
  std::size_t train_per_class = 20;  // synthetic scenes only
  std::size_t test_per_class = 40;   // synthetic scenes only
  std::uint64_t seed = 11;
  bool normalize = true;             // per-band z-score of the HSI and LiDAR rasters
  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

struct ExperimentConfig {
  std::optional<FileSource> files;
  std::optional<SceneSpec> scene;
  SamplingConfig sampling;
  ExtractorConfig extractor;
  bool hsi_bands_explicit = false;  // otherwise taken from the data
  AttentionConfig attention;
  TrainConfig train;
  std::vector<WiringConfig> ablation_wirings = default_ablation_wirings();
  bool render_mask_unlabeled = true;
  std::string output_dir;

  /// Relative data paths resolve against this directory. Not serialized.
  std::filesystem::path base_dir;

  void validate() const;
  std::filesystem::path resolve(const std::string& path) const;
  std::vector<std::string> class_names() const;
  std::size_t classes() const;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.files == b.files && a.scene == b.scene && a.sampling == b.sampling &&
           a.extractor == b.extractor && a.hsi_bands_explicit == b.hsi_bands_explicit &&
           a.attention == b.attention && a.train == b.train &&
           a.ablation_wirings == b.ablation_wirings &&
           a.render_mask_unlabeled == b.render_mask_unlabeled && a.output_dir == b.output_dir;
  }
};

using KeyValues = std::map<std::string, std::string>;

/// Every key the config format accepts.
const std::vector<std::string>& config_keys();

/// Closest valid key by edit distance.
std::string nearest_key(std::string_view key);

KeyValues parse_key_values(std::string_view text);

/// Applies a `section.key=value` override.
void apply_override(KeyValues& kv, std::string_view assignment);

ExperimentConfig build_config(const KeyValues& kv, std::filesystem::path base_dir = {});
ExperimentConfig parse_config(std::string_view text, std::filesystem::path base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});
std::string serialize_config(const ExperimentConfig& config);

std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace dnl
