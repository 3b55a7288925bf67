#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>

#include "varerr_cli/runner.hpp"

namespace {

// VARERR_LOG_LEVEL takes spdlog level names (trace, debug, info, warn, error, off).
void setup_logging() {
  auto logger = spdlog::stderr_color_mt("varerr");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("VARERR_LOG_LEVEL")) spdlog::cfg::helpers::load_levels(env);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"varerr: error-functional solvers with a-posteriori certificates"};
  app.set_version_flag("--version", std::string(VARERR_VERSION));
  app.require_subcommand(1);

  varerr::cli::Overrides overrides;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  int max_iter = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "YAML experiment config")->required();
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out-dir", out_dir, "override the output directory");
    cmd->add_option("--max-iter", max_iter, "override descent.max_iter");
  };
  CLI::App* run = app.add_subcommand("run", "run one experiment on a single grid");
  CLI::App* sweep = app.add_subcommand("sweep", "run a refinement ladder and tabulate orders");
  add_common(run);
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : varerr::cli::kExitUsage;
  }

  const CLI::App* chosen = run->parsed() ? run : sweep;
  if (chosen->count("--seed")) overrides.seed = seed;
  if (chosen->count("--out-dir")) overrides.out_dir = out_dir;
  if (chosen->count("--max-iter")) overrides.max_iter = max_iter;

  try {
    return run->parsed() ? varerr::cli::run_command(config_path, overrides)
                         : varerr::cli::sweep_command(config_path, overrides);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return varerr::cli::kExitFlagged;
  }
}
