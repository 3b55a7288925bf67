#pragma once

// Experiment configuration: a single YAML document.
//
//   problem: ode | elliptic | wave | nlwave | ns
//   grid: 200                  # or a strictly increasing ladder [17, 33, 65]
//   seed: 42
//   output_dir: out/ode
//   initial: zero | random     # optional, default zero
//   params: {...}              # family-specific, see README
//   tolerances: {tol_E: 1e-10, cg_tol: 1e-12, grad_tol: 1e-4}
//   descent: {policy: newton | gradient, max_iter: 100}
//   coercivity: {enabled: true, pairs: 50, safety: 1.5, refine_steps: 1000,
//                amplitude: 0.5, sublevel_cap: .inf}
//
// Unknown keys are rejected with the file position of the offending key.

#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varerr/descent.hpp"

namespace varerr::cli {

enum class Family { kOde, kElliptic, kWave, kNlWave, kNs };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, int column, const std::string& message);
  ConfigError(const std::string& source, const std::string& message);

  [[nodiscard]] int line() const { return line_; }  // 1-based, 0 when unknown
  [[nodiscard]] int column() const { return column_; }

 private:
  int line_ = 0;
  int column_ = 0;
};

struct OdeParams {
  std::string field = "linear";
  double coefficient = -1.0;
  std::vector<double> x0 = {1.0};
  double horizon = 1.0;
};

struct EllipticParams {
  std::string flux = "identity";
  double amplitude = 1.0;  // manufactured u* = amplitude sin(pi x) sin(pi y)
};

struct WaveParams {
  std::string forcing = "manufactured";  // zero | manufactured | separable | bump
  double amplitude = 1.0;
  int mode = 1;
  double horizon = 0.5;
  double length = 1.0;
  double center_t = 0.25;  // bump only
  double center_x = 0.5;
  double radius = 0.2;
};

struct NlWaveParams {
  std::string nonlinearity = "manufactured_arctan";  // + sine_ut | arctan | linear
  double alpha = 0.5;
  double amplitude = 1.0;
  int mode = 1;
  double horizon = 0.5;
  double length = 1.0;
};

struct NsParams {
  double nu = 1.0;
  std::string force = "manufactured";  // manufactured | vortex
  double amplitude = 0.25;
};

struct CoercivitySettings {
  bool enabled = true;
  int pairs = 50;
  double safety = 1.5;
  int refine_steps = 1000;
  double amplitude = 0.5;
  double sublevel_cap = std::numeric_limits<double>::infinity();
};

struct ExperimentConfig {
  std::string source;  // file the config came from
  Family problem = Family::kOde;
  std::vector<int> grid;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string initial = "zero";

  OdeParams ode;
  EllipticParams elliptic;
  WaveParams wave;
  NlWaveParams nlwave;
  NsParams ns;

  double tol_E = 1e-10;
  double cg_tol = 1e-12;
  double grad_tol = 1e-4;        // final gradient threshold for trace validation
  std::optional<Policy> policy;  // family default when unset
  int max_iter = 100;
  CoercivitySettings coercivity;

  [[nodiscard]] Policy effective_policy() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

// Echo of every setting, including defaults, for report.json.
nlohmann::json to_json(const ExperimentConfig& c);

}  // namespace varerr::cli
