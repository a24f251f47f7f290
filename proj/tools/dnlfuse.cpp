// Command-line front end: dnlfuse <subcommand> --config <path> [overrides...] --out <dir>

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dnl/config.hpp"
#include "dnl/errors.hpp"
#include "dnl/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"HSI + LiDAR classification with disentangled non-local attention"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  for (const char* name : {"train", "eval", "ablate", "compare", "gradcheck", "synth", "render"}) {
    CLI::App* sub = app.add_subcommand(name);
    CLI::Option* config = sub->add_option("--config", config_path, "experiment config file");
    if (std::string(name) != "gradcheck") config->required();
    sub->add_option("--out", out_dir, "output directory (defaults to output.dir)");
    sub->add_option("overrides", overrides, "section.key=value overrides");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    dnl::ExperimentConfig config;
    if (!config_path.empty()) config = dnl::load_config(config_path, overrides);
    if (out_dir.empty()) out_dir = config.output_dir;
    if (out_dir.empty()) throw dnl::ConfigError("no output directory: pass --out or set output.dir");
    return dnl::run_command(command, config, out_dir, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "dnlfuse " << command << ": " << e.what() << '\n';
    return 1;
  }
}
