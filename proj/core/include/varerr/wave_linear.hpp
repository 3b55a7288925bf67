#pragma once

// Linear model u_tt - u_xx - u = f with zero initial data as a space-time
// least-squares problem: E(u) = 1/2 ||U||^2_H1 with U the residual field.

#include <functional>
#include <string>

#include "varerr/descent.hpp"
#include "varerr/wave_common.hpp"

namespace varerr::wave {

struct Forcing {
  std::string name;
  std::function<double(double t, double x)> f;
  /// Known solution when the forcing is manufactured (empty otherwise).
  std::function<double(double t, double x)> exact;
};

Forcing zero_forcing();
/// u* = amplitude t^2 sin(k pi x / L), f = u*_tt - u*_xx - u*.
Forcing manufactured_forcing(double amplitude, int k, double length);
/// amplitude * t * sin(k pi x / L)
Forcing separable_forcing(double amplitude, int k, double length);
/// Smooth compactly supported bump of the given radius centred at (t0, x0).
Forcing bump_forcing(double amplitude, double t0, double x0, double radius);

struct WaveSettings {
  double cg_tol = 1e-14;  // normal-equation CG; the energy monitor usually stops first
};

class WaveProblem {
 public:
  WaveProblem(const GridSpec& grid, Forcing forcing, WaveSettings settings = {});

  [[nodiscard]] const SpaceTimeOps& ops() const { return ops_; }
  [[nodiscard]] const Forcing& forcing() const { return forcing_; }
  [[nodiscard]] const Field& forcing_nodal() const { return f_; }
  [[nodiscard]] const WaveSettings& settings() const { return settings_; }

 private:
  SpaceTimeOps ops_;
  Forcing forcing_;
  Field f_;
  WaveSettings settings_;
};

/// Test-class U with int U_t w_t + U_x w_x + U w = int -u_t w_t + u_x w_x - (f+u) w.
Field residual(const WaveProblem& p, std::span<const double> u);
double energy(const WaveProblem& p, std::span<const double> u);
/// Coefficients of v -> <E'(u), v> = int v_x U_x - v_t U_t - v U on trial nodes.
Field euclidean_gradient(const WaveProblem& p, std::span<const double> u);
/// Trial-class H1_full Riesz representative.
Field gradient(const WaveProblem& p, std::span<const double> u);

/// Conjugate gradients on the normal operator (E is quadratic), preconditioned
/// by the trial Gram solve, starting from u0 (zero when empty). Every CG
/// iterate is recorded in the trace; stops once E <= tol_E.
DescentResult solve(const WaveProblem& p, Field u0, const DescentOptions& options);

}  // namespace varerr::wave
