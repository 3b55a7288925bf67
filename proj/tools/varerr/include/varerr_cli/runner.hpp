#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "varerr/certify.hpp"
#include "varerr/trace.hpp"
#include "varerr_cli/config.hpp"

namespace varerr::cli {

// Exit statuses shared by run and sweep.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFlagged = 2;

struct RunRecord {
  nlohmann::json config;  // echo including defaults
  int grid = 0;
  std::string status;  // "converged" or "flagged"
  std::vector<std::string> flags;
  DescentTrace trace;
  TraceValidation validation;
  ErrorCertificate certificate;
  std::optional<CoercivityReport> coercivity;
  nlohmann::json diagnostics;  // family-specific numbers, never NaN
  double wall_clock_seconds = 0.0;
  std::string version;

  bool operator==(const RunRecord&) const = default;
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

struct RunOutcome {
  RunRecord record;
  double h = 0.0;               // grid spacing used for observed orders
  std::optional<double> error;  // distance to the known exact solution, when there is one
};

// Runs one grid of the experiment; writes nothing.
RunOutcome run_experiment(const ExperimentConfig& config, int grid);

void write_trace_csv(const std::filesystem::path& path, const DescentTrace& trace);
void write_report(const std::filesystem::path& path, const RunRecord& record);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> max_iter;
};

// Validates overrides against the config; throws ConfigError.
void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

// Entry points behind `varerr run` / `varerr sweep`. Usage and config errors
// are reported on stderr and return kExitUsage before any file is written.
int run_command(const std::string& config_path, const Overrides& overrides);
int sweep_command(const std::string& config_path, const Overrides& overrides);

}  // namespace varerr::cli
