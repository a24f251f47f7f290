#include "dnl/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dnl/checkpoint.hpp"
#include "dnl/errors.hpp"
#include "dnl/gradcheck.hpp"
#include "dnl/render.hpp"
#include "dnl/scene.hpp"
#include "dnl/train.hpp"

namespace dnl {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path existing(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("file not found: " + path.string());
  return path;
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<RunMetrics> evaluate_checkpoints(const ExperimentConfig& config,
                                             const PatchDataset& data, const fs::path& out) {
  const ModelConfig mc = model_config(config, data.bands());
  std::vector<RunMetrics> runs;
  for (std::size_t rep = 0; rep < config.train.repetitions; ++rep) {
    Model model(mc, config.train.seed + rep);
    model.parameters().load_state(load_checkpoint(existing(checkpoint_path(out, rep))));
    runs.push_back(evaluate(model, data, Split::test));
  }
  return runs;
}

void write_report(const fs::path& out, const std::string& stem, const MetricsReport& report) {
  write_text(out / (stem + ".txt"), format_metrics_table(report));
  write_text(out / (stem + ".csv"), format_metrics_csv(report));
}

int cmd_train(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const auto scene = load_scene(config);
  const PatchDataset data = build_dataset(config, scene);
  const ModelConfig mc = model_config(config, data.bands());
  std::ostringstream history;
  history << "repetition,epoch,loss\n";
  for (std::size_t rep = 0; rep < config.train.repetitions; ++rep) {
    const std::uint64_t seed = config.train.seed + rep;
    Model model(mc, seed);
    const TrainResult result = train(model, data, config.train, seed);
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      history << rep << ',' << e + 1 << ',' << format_g(result.epoch_loss[e]) << '\n';
    }
    save_checkpoint(checkpoint_path(out, rep), model.parameters().state());
    log << "repetition " << rep << ": final loss "
        << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << '\n';
  }
  write_text(out / "loss_history.csv", history.str());
  write_text(out / "config.txt", serialize_config(config));
  return 0;
}

int cmd_eval(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const auto scene = load_scene(config);
  const PatchDataset data = build_dataset(config, scene);
  const MetricsReport report =
      aggregate(evaluate_checkpoints(config, data, out), config.class_names());
  write_report(out, "metrics", report);
  write_text(out / "confusion.csv", format_confusion_csv(report.confusion));
  log << format_metrics_table(report);
  return 0;
}

int cmd_ablate(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const auto scene = load_scene(config);
  const PatchDataset data = build_dataset(config, scene);
  const auto rows =
      ablate(model_config(config, data.bands()), data, config.ablation_wirings, config.train);
  write_text(out / "ablation.txt", format_ablation_table(rows));
  write_text(out / "ablation.csv", format_ablation_csv(rows));
  log << format_ablation_table(rows);
  return 0;
}

int cmd_compare(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const auto scene = load_scene(config);
  const PatchDataset data = build_dataset(config, scene);
  const Comparison c = compare_nl_dnl(model_config(config, data.bands()), data, config.train,
                                      config.class_names());
  write_text(out / "compare.txt", format_comparison_table(c));
  write_text(out / "compare.csv", format_comparison_csv(c));
  write_report(out, "metrics_nl", c.nl);
  write_report(out, "metrics_dnl", c.dnl);
  log << format_comparison_table(c);
  return 0;
}

int cmd_gradcheck(const fs::path& out, std::ostream& log) {
  const auto results = run_gradcheck_suite();
  std::ostringstream report;
  std::size_t failures = 0;
  for (const auto& r : results) {
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-48s n=%-6zu max_rel_err=%.3e\n",
                  r.passed ? "ok" : "FAIL", r.name.c_str(), r.checked, r.max_relative_error);
    report << line;
    if (!r.passed) ++failures;
  }
  report << results.size() - failures << "/" << results.size() << " gradient checks passed\n";
  write_text(out / "gradcheck.txt", report.str());
  log << report.str();
  return failures == 0 ? 0 : 1;
}

int cmd_synth(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  if (!config.scene) throw ConfigError("synth needs a scene.* data source");
  const SceneData scene = synth_scene(*config.scene);
  save_raster(out / "hsi.hdr", scene.hsi);
  save_raster(out / "lidar.hdr", scene.lidar);
  save_labels(out / "labels.hdr", scene.labels);
  log << "wrote " << scene.hsi.width << "x" << scene.hsi.height << "x" << scene.hsi.bands
      << " scene to " << out.string() << '\n';
  return 0;
}

int cmd_render(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const auto scene = load_scene(config);
  const PatchDataset data = build_dataset(config, scene);
  Model model(model_config(config, data.bands()), config.train.seed);
  model.parameters().load_state(load_checkpoint(existing(checkpoint_path(out, 0))));

  const std::size_t H = scene->labels.height, W = scene->labels.width;
  LabelRaster map(W, H);
  std::vector<PixelSample> pixels;
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      if (!config.render_mask_unlabeled || scene->labels.at(r, c) != 0) {
        pixels.push_back({r, c, 1});
      }
    }
  }
  constexpr std::size_t batch = 64;
  for (std::size_t i = 0; i < pixels.size(); i += batch) {
    const auto chunk = std::span(pixels).subspan(i, std::min(batch, pixels.size() - i));
    const std::vector<int> pred = model.predict(data.make_batch(chunk));
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      map.at(chunk[j].row, chunk[j].col) = static_cast<std::int16_t>(pred[j] + 1);
    }
  }
  write_ppm(out / "map.ppm", map, default_palette(config.classes()));
  log << "rendered " << pixels.size() << " pixels to " << (out / "map.ppm").string() << '\n';
  return 0;
}

}  // namespace

std::shared_ptr<SceneData> load_scene(const ExperimentConfig& config) {
  auto scene = std::make_shared<SceneData>();
  if (config.scene) {
    *scene = synth_scene(*config.scene);
  } else {
    const FileSource& f = *config.files;
    scene->hsi = load_raster(existing(config.resolve(f.hsi)));
    scene->lidar = load_raster(existing(config.resolve(f.lidar)));
    scene->labels = load_labels(existing(config.resolve(f.labels)));
  }
  validate_scene(*scene);
  if (config.sampling.normalize) {
    normalize_bands(scene->hsi);
    normalize_bands(scene->lidar);
  }
  return scene;
}

PatchDataset build_dataset(const ExperimentConfig& config,
                           std::shared_ptr<const SceneData> scene) {
  const ClassCounts counts =
      config.files ? ClassCounts{config.files->train_counts, config.files->test_counts}
                   : ClassCounts::uniform(config.scene->classes, config.sampling.train_per_class,
                                          config.sampling.test_per_class);
  return sample_patches(std::move(scene), config.extractor.patch_size, counts,
                        config.sampling.seed);
}

ModelConfig model_config(const ExperimentConfig& config, std::size_t hsi_bands) {
  ModelConfig mc;
  mc.extractor = config.extractor;
  if (config.hsi_bands_explicit && config.extractor.hsi_bands != hsi_bands) {
    throw ConfigError("extractor.hsi_bands = " + std::to_string(config.extractor.hsi_bands) +
                      " but the HSI data has " + std::to_string(hsi_bands) + " bands");
  }
  mc.extractor.hsi_bands = hsi_bands;
  mc.attention = config.attention;
  mc.classes = config.classes();
  mc.validate();
  return mc;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& out, std::size_t rep) {
  return out / ("model_rep" + std::to_string(rep) + ".ckpt");
}

int run_command(std::string_view command, const ExperimentConfig& config,
                const std::filesystem::path& out, std::ostream& log) {
  std::filesystem::create_directories(out);
  if (command == "train") return cmd_train(config, out, log);
  if (command == "eval") return cmd_eval(config, out, log);
  if (command == "ablate") return cmd_ablate(config, out, log);
  if (command == "compare") return cmd_compare(config, out, log);
  if (command == "gradcheck") return cmd_gradcheck(out, log);
  if (command == "synth") return cmd_synth(config, out, log);
  if (command == "render") return cmd_render(config, out, log);
  throw ConfigError("unknown subcommand '" + std::string(command) + "'");
}

}  // namespace dnl
