#pragma once

// Cauchy problem x' = f(x), x(0) = x0 on [0, T], written as x = x0 + z with
// z(0) = 0. Paths are stored node-major: z[i * dim + c] is component c at t_i.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>

#include "varerr/descent.hpp"
#include "varerr/hilbert.hpp"

namespace varerr::ode {

struct OdeField {
  std::string name;
  int dim = 1;
  std::function<void(std::span<const double> y, std::span<double> out)> value;
  /// Row-major dim x dim Jacobian.
  std::function<void(std::span<const double> y, std::span<double> jac)> jacobian;
  double lipschitz = 0.0;  // declared bound on ||grad f||
};

/// Catalog, all componentwise: linear a*x, sine a*sin(x), arctan a*atan(x),
/// logistic a*x*(1-x) (declared bound |a| is only valid on [0, 1]).
OdeField linear_field(double a, int dim = 1);
OdeField sine_field(double a, int dim = 1);
OdeField arctan_field(double a, int dim = 1);
OdeField logistic_field(double a, int dim = 1);
OdeField make_field(const std::string& name, double coefficient, int dim = 1);

class OdeProblem {
 public:
  OdeProblem(OdeField field, Field x0, double horizon, int n_steps);

  [[nodiscard]] const OdeField& field() const { return field_; }
  [[nodiscard]] const Field& x0() const { return x0_; }
  [[nodiscard]] int dim() const { return field_.dim; }
  [[nodiscard]] int n_steps() const { return n_steps_; }
  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] double step() const { return horizon_ / n_steps_; }
  [[nodiscard]] double time(int i) const { return i * step(); }
  [[nodiscard]] std::size_t path_size() const {
    return static_cast<std::size_t>(n_steps_ + 1) * static_cast<std::size_t>(field_.dim);
  }
  [[nodiscard]] GridSpec grid() const {
    return GridSpec::line(n_steps_ + 1, horizon_, AxisRole::kTime);
  }

 private:
  OdeField field_;
  Field x0_;
  double horizon_;
  int n_steps_;
};

/// Raised when I - (h/2) grad f is singular at some step; halve h and retry.
class SingularStep : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

Field zero_path(const OdeProblem& p);

/// 1/2 sum_i h |(z_{i+1}-z_i)/h - f(x0 + (z_i+z_{i+1})/2)|^2.
double energy(const OdeProblem& p, std::span<const double> z);

/// Coefficients of the linear functional v -> <E'(z), v> on nodal values.
Field euclidean_gradient(const OdeProblem& p, std::span<const double> z);

/// Riesz representative of E'(z) for <g, v> = int g'.v' with g(0) = 0.
Field residual_gradient(const OdeProblem& p, std::span<const double> z);

/// int g'.v' by the same midpoint differences.
double h_inner(const OdeProblem& p, std::span<const double> g, std::span<const double> v);

/// Z' = f(x0+z) + grad f(x0+z) Z - z', Z(0) = 0, by the implicit midpoint rule.
Field newton_direction(const OdeProblem& p, std::span<const double> z);

/// |<E'(z), Z> + 2 E(z)| / (1 + 2 E(z)) with Z the Newton direction.
double pairing_check(const OdeProblem& p, std::span<const double> z);

DescentResult descend(const OdeProblem& p, Field z0, Policy policy, const DescentOptions& options);

/// Discrete minimizer: the implicit-midpoint trajectory (E = 0 up to roundoff).
/// Solved per step by Newton iteration.
Field midpoint_solution(const OdeProblem& p);

struct LipschitzReport {
  double max_norm = 0.0;
  double declared = 0.0;
  bool exceeds_declared = false;
};

/// Max sampled spectral norm of grad f over [lo, hi]^dim (power iteration per
/// sample). The center of the box is always included.
LipschitzReport check_lipschitz(const OdeField& field, double lo, double hi, int n_samples,
                                std::uint64_t seed = 7);

/// Smooth random path: low-frequency sines vanishing at t = 0.
Field random_path(const OdeProblem& p, std::mt19937_64& rng, double amplitude = 1.0);

/// max_t |y(t) - z(t)|^2
double max_sq_distance(const OdeProblem& p, std::span<const double> y, std::span<const double> z);

}  // namespace varerr::ode
