#pragma once

// Empirical enhanced-coercivity estimation, error certificates and descent
// trace validation shared by all problem families.

#include <cstdint>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varerr/hilbert.hpp"
#include "varerr/trace.hpp"

namespace varerr {

/// What a problem family must provide for coercivity sampling.
struct CoercivityBinding {
  std::function<double(std::span<const double>)> energy;
  /// Squared distance in the family's norm.
  std::function<double(std::span<const double>, std::span<const double>)> distance_sq;
  /// Random admissible perturbation; must be deterministic given the engine state.
  std::function<Field(std::mt19937_64&)> sample;
  /// Fields are drawn as center + perturbation (zero when empty).
  Field center;
};

struct CoercivityOptions {
  int n_pairs = 50;
  double sublevel_cap = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;
  // Hill-climbing moves applied to the worst sampled pair. The sampled
  // maximum of a Rayleigh-like quotient converges slowly; climbing from it
  // makes the estimate reproducible across seeds. 0 disables refinement.
  int refine_steps = 1000;
};

struct CoercivityReport {
  int sample_count = 0;  // pairs that entered the maximum
  int skipped = 0;       // pairs with E(u)+E(v) == 0 or above the sub-level cap
  double max_ratio = 0.0;
  int argmax_pair = -1;
  std::string argmax_kind;
  int refine_accepted = 0;  // refinement moves that raised the maximum
  double sublevel_cap = std::numeric_limits<double>::infinity();

  bool operator==(const CoercivityReport&) const = default;
};

/// Max of ||u-v||^2 / (E(u)+E(v)) over sampled pairs. Pairs cycle through
/// (c+d1, c+d2), (c+d, c-d) and (c+d, c), the last two being the worst cases
/// for linear problems.
CoercivityReport estimate_coercivity(const CoercivityBinding& binding,
                                     const CoercivityOptions& options);

struct ErrorCertificate {
  double energy = 0.0;
  double c_emp = 0.0;
  double bound = 0.0;
  bool local_regime = false;
  int sample_size = 0;

  bool operator==(const ErrorCertificate&) const = default;
};

/// bound = safety * max_ratio * E(v). The local-regime flag is set when the
/// constant came from a finite sub-level cap and E(v) lies below it.
ErrorCertificate make_certificate(double energy, const CoercivityReport& coercivity,
                                  double safety = 1.5);

struct TraceThresholds {
  double tol_E = 1e-10;
  double grad_tol = 1e-4;
};

struct TraceValidation {
  bool finite = true;
  bool monotone = true;
  bool energy_ok = false;
  bool gradient_ok = false;
  bool gradient_small_energy_large = false;
  /// Pearson correlation of log E against log ||E'|| (NaN-free: 0 when undefined).
  double correlation = 0.0;
  bool flagged = false;
  std::vector<std::string> messages;

  bool operator==(const TraceValidation&) const = default;
};

TraceValidation validate_trace(const DescentTrace& trace, const TraceThresholds& thresholds);

void to_json(nlohmann::json& j, const TraceEntry& e);
void from_json(const nlohmann::json& j, TraceEntry& e);
void to_json(nlohmann::json& j, const DescentTrace& t);
void from_json(const nlohmann::json& j, DescentTrace& t);
void to_json(nlohmann::json& j, const CoercivityReport& r);
void from_json(const nlohmann::json& j, CoercivityReport& r);
void to_json(nlohmann::json& j, const ErrorCertificate& c);
void from_json(const nlohmann::json& j, ErrorCertificate& c);
void to_json(nlohmann::json& j, const TraceValidation& v);
void from_json(const nlohmann::json& j, TraceValidation& v);

}  // namespace varerr
