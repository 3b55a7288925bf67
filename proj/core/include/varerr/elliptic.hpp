#pragma once

// Monotone quasilinear problem div[Phi(grad u)] = g on [0,1]^2 with u = u0 on
// the boundary, unknown v = u - u0 vanishing on the boundary. Fields are nodal
// on an n x n grid, index(i, j) with i along x.

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>

#include "varerr/descent.hpp"
#include "varerr/hilbert.hpp"

namespace varerr::elliptic {

struct FluxMap {
  std::string name;
  std::function<std::array<double, 2>(double ax, double ay)> value;
  /// Row-major dPhi_k/da_l.
  std::function<std::array<double, 4>(double ax, double ay)> jacobian;
  double bound = 0.0;         // declared M
  double monotonicity = 0.0;  // declared c (<= 0 when not monotone)
};

FluxMap identity_flux();
/// 2a + arctan(a), componentwise.
FluxMap arctan_flux();
/// a / (1 + |a|^2); not monotone for |a| > 1.
FluxMap saturating_flux();
FluxMap make_flux(const std::string& name);

struct SolverSettings {
  double cg_tol = 1e-12;
  int cg_max_iter = 20000;
};

class EllipticProblem {
 public:
  /// `lift` supplies the boundary values (its interior is ignored); `forcing`
  /// is nodal g, zero when empty.
  EllipticProblem(FluxMap flux, int n, Field lift = {}, Field forcing = {},
                  SolverSettings settings = {});

  [[nodiscard]] const FluxMap& flux() const { return flux_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] double h() const { return 1.0 / (n_ - 1); }
  [[nodiscard]] const GridSpec& grid() const { return grid_; }
  [[nodiscard]] const Field& lift() const { return lift_; }
  [[nodiscard]] const Field& forcing() const { return forcing_; }
  [[nodiscard]] const SolverSettings& settings() const { return settings_; }
  [[nodiscard]] bool interior(int i, int j) const {
    return i > 0 && j > 0 && i < n_ - 1 && j < n_ - 1;
  }
  /// Zeroes boundary entries in place.
  void mask(std::span<double> v) const;
  /// Poisson (H1_semi Gram) operator on zero-Dirichlet fields.
  void apply_laplacian(std::span<const double> v, std::span<double> out) const;

 private:
  FluxMap flux_;
  int n_;
  GridSpec grid_;
  Field lift_;
  Field forcing_;
  SolverSettings settings_;
};

/// Manufactured problem with u* = amplitude * sin(pi x) sin(pi y) and the
/// matching forcing g = sum_kl dPhi_k/da_l(grad u*) d_k d_l u*.
struct Manufactured {
  EllipticProblem problem;
  Field exact;  // nodal u*
};
Manufactured manufactured(const FluxMap& flux, int n, double amplitude = 1.0,
                          SolverSettings settings = {});

struct FieldSolve {
  Field field;
  SolveReport report;
};

/// U with int grad U . grad w = -int Phi(grad(v+u0)) . grad w - int g w.
FieldSolve residual(const EllipticProblem& p, std::span<const double> v);

/// 1/2 int |grad U|^2. Throws SolverFailure when the Poisson solve fails.
double energy(const EllipticProblem& p, std::span<const double> v);

/// -J^T U, the coefficients of v' -> <E'(v), v'> on nodal values.
Field euclidean_gradient(const EllipticProblem& p, std::span<const double> v);

/// H1_0 Riesz representative of E'(v).
FieldSolve gradient(const EllipticProblem& p, std::span<const double> v);

struct NewtonStep {
  Field step;
  SolveReport report;
  bool symmetric = true;  // solved by CG on J itself
  bool monotonicity_violation = false;
  double pairing = 0.0;  // <E'(v), step>
};

/// V solving J(v) V = -R(v) (linearized flux at v + u0).
NewtonStep newton_step(const EllipticProblem& p, std::span<const double> v);

DescentResult descend(const EllipticProblem& p, Field v0, Policy policy,
                      const DescentOptions& options);

struct FluxHypotheses {
  double max_gradient = 0.0;
  double min_monotonicity = 0.0;
  bool monotone = false;
};

/// Sampled max |grad Phi| (spectral) and min (Phi(a1)-Phi(a0)).(a1-a0)/|a1-a0|^2
/// over [lo, hi]^2. The box center is always among the gradient samples.
FluxHypotheses check_flux_hypotheses(const FluxMap& flux, double lo, double hi, int n_samples,
                                     std::uint64_t seed = 11);

/// int grad a . grad b
double h1_semi(const EllipticProblem& p, std::span<const double> a, std::span<const double> b);
double l2_error(const EllipticProblem& p, std::span<const double> a, std::span<const double> b);

/// Smooth random zero-Dirichlet field (sines up to mode 3).
Field random_field(const EllipticProblem& p, std::mt19937_64& rng, double amplitude = 1.0);

}  // namespace varerr::elliptic
