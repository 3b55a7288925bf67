#pragma once

// Nonlinear wave u_tt - u_xx - f(u_x, u_t, u, t, x) = 0 with zero initial
// data. The composed term is evaluated nodally (u_t, u_x by nodal
// differences) and integrated with the lumped trapezoid weights.

#include <cstdint>
#include <functional>
#include <string>

#include "varerr/descent.hpp"
#include "varerr/wave_common.hpp"

namespace varerr::wave {

struct NlArgs {
  double ux = 0.0;  // spatial gradient slot
  double ut = 0.0;  // time derivative slot
  double u = 0.0;
  double t = 0.0;
  double x = 0.0;
};

struct NlValue {
  double f = 0.0;
  double f_ux = 0.0;
  double f_ut = 0.0;
  double f_u = 0.0;
};

struct WaveNonlinearity {
  std::string name;
  std::function<NlValue(const NlArgs&)> eval;
  double lipschitz = 0.0;  // declared M for f - u
  double fu_lower = 0.0;   // declared lower bound for |f_u|
  /// Known solution when the source is manufactured (empty otherwise).
  std::function<double(double t, double x)> exact;
};

using Source = std::function<double(double t, double x)>;

/// u + alpha sin(u_t) + g
WaveNonlinearity sine_ut_nonlinearity(double alpha, Source g = {});
/// u + alpha arctan(u) + g
WaveNonlinearity arctan_nonlinearity(double alpha, Source g = {});
/// u + g
WaveNonlinearity linear_nonlinearity(Source g = {});
/// u + alpha arctan(u) + g with g chosen so that u* = amplitude t^2 sin(k pi x/L)
/// solves the problem.
WaveNonlinearity manufactured_arctan(double alpha, double amplitude, int k, double length);

class NLWaveProblem {
 public:
  NLWaveProblem(const GridSpec& grid, WaveNonlinearity nonlinearity);

  [[nodiscard]] const SpaceTimeOps& ops() const { return ops_; }
  [[nodiscard]] const WaveNonlinearity& nonlinearity() const { return f_; }

 private:
  SpaceTimeOps ops_;
  WaveNonlinearity f_;
};

/// Test-class U with int (U_t+u_t) w_t - (u_x-U_x) w_x + (U + f) w = 0.
Field residual(const NLWaveProblem& p, std::span<const double> u);
double energy(const NLWaveProblem& p, std::span<const double> u);
/// Coefficients of v -> int -v_t U_t + v_x U_x - (f_ux v_x + f_ut v_t + f_u v) U.
Field euclidean_gradient(const NLWaveProblem& p, std::span<const double> u);
Field gradient(const NLWaveProblem& p, std::span<const double> u);

/// V with J(u) V = -(residual data): the linearized system is block lower
/// triangular in time, so V is marched row by row. Throws SolverFailure
/// when a marching coefficient vanishes.
Field newton_direction(const NLWaveProblem& p, std::span<const double> u);

DescentResult descend(const NLWaveProblem& p, Field u0, Policy policy,
                      const DescentOptions& options);

struct HypothesisReport {
  double lipschitz_quotient = 0.0;  // sampled, u-slot weighted by 1/D
  double min_abs_fu = 0.0;
  double f0_l2 = 0.0;         // ||f(0,0,0,t,x)||_L2(Q)
  double embedding_d = 0.0;   // estimated sup-norm embedding constant
  bool lipschitz_ok = false;  // quotient < 1
  bool fu_ok = false;         // min |f_u| >= declared lower bound (> 0)
};

/// Samples single-slot and joint perturbations in [lo, hi]^3 x Q.
HypothesisReport check_hypotheses(const NLWaveProblem& p, double lo, double hi, int n_samples,
                                  std::uint64_t seed = 13);

}  // namespace varerr::wave
