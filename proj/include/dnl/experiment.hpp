#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string_view>

#include "dnl/config.hpp"
#include "dnl/dataset.hpp"
#include "dnl/model.hpp"

namespace dnl {

/// Loads the rasters (or synthesizes the scene) and normalizes bands if requested.
std::shared_ptr<SceneData> load_scene(const ExperimentConfig& config);

PatchDataset build_dataset(const ExperimentConfig& config,
                           std::shared_ptr<const SceneData> scene);

ModelConfig model_config(const ExperimentConfig& config, std::size_t hsi_bands);

std::filesystem::path checkpoint_path(const std::filesystem::path& out, std::size_t rep);

/// Runs one subcommand, writing its outputs under `out`. Throws on failure;
/// returns nonzero when gradcheck finds a mismatch.
int run_command(std::string_view command, const ExperimentConfig& config,
                const std::filesystem::path& out, std::ostream& log);

}  // namespace dnl
