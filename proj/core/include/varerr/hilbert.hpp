#pragma once

// Discrete Hilbert-space substrate shared by every problem family: uniform
// tensor grids, quadrature-based inner products, a (preconditioned) conjugate
// gradient solver and a finite-difference gradient checker.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace varerr {

using Field = std::vector<double>;

/// Thrown when two grid functions (or a function and its grid) disagree in shape.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class AxisRole { kTime, kSpace };

struct Axis {
  int n_nodes = 0;
  double extent = 0.0;
  AxisRole role = AxisRole::kSpace;

  [[nodiscard]] double spacing() const { return extent / (n_nodes - 1); }
  bool operator==(const Axis&) const = default;
};

/// Uniform tensor-product grid with one or two axes. Nodes are stored
/// row-major: the first axis varies slowest.
class GridSpec {
 public:
  explicit GridSpec(std::vector<Axis> axes);

  static GridSpec line(int n_nodes, double extent, AxisRole role = AxisRole::kSpace);
  static GridSpec rect(Axis slow, Axis fast);

  [[nodiscard]] int dims() const { return static_cast<int>(axes_.size()); }
  [[nodiscard]] const Axis& axis(int a) const { return axes_.at(static_cast<std::size_t>(a)); }
  [[nodiscard]] int n(int a) const { return axis(a).n_nodes; }
  [[nodiscard]] double spacing(int a) const { return axis(a).spacing(); }
  [[nodiscard]] double coordinate(int a, int i) const { return i * spacing(a); }
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t index(int i0, int i1) const {
    return static_cast<std::size_t>(i0) * static_cast<std::size_t>(axes_[1].n_nodes) +
           static_cast<std::size_t>(i1);
  }

  bool operator==(const GridSpec&) const = default;

 private:
  std::vector<Axis> axes_;
};

enum class InnerProductKind { kL2, kH1Semi, kH1Full };

/// Quadrature inner product of two grid functions. `components` values are
/// stored per node (node-major) and summed. L2 uses the trapezoid rule;
/// gradient terms use one difference per grid edge, weighted by the
/// trapezoid rule in the transverse direction.
double inner(InnerProductKind kind, const GridSpec& grid, std::span<const double> u,
             std::span<const double> v, int components = 1);

double norm(InnerProductKind kind, const GridSpec& grid, std::span<const double> u,
            int components = 1);

/// out = G u, where G is the Gram matrix of `kind`: inner(u, v) == dot(v, G u).
void gram_apply(InnerProductKind kind, const GridSpec& grid, std::span<const double> u,
                std::span<double> out, int components = 1);

/// Trapezoid node weights (products of the 1-D weights).
Field trapezoid_weights(const GridSpec& grid);

// Small dense-vector helpers, fixed summation order.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
Field lincomb(double a, std::span<const double> x, double b, std::span<const double> y);

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

using LinearMap = std::function<void(std::span<const double>, std::span<double>)>;

struct SolveResult {
  Field x;
  SolveReport report;
};

struct CgOptions {
  double tol = 1e-10;
  int max_iter = 1000;
  /// Optional SPD preconditioner z = M^{-1} r.
  const LinearMap* preconditioner = nullptr;
  /// Optional starting iterate; zero when empty.
  std::span<const double> initial_guess = {};
  // Scale for the relative residual; ||rhs|| when zero. Useful when rhs comes
  // out of a cancellation and its own norm understates the data's size.
  double reference_norm = 0.0;
  /// Called after every iteration with the iterate and r.z of its residual;
  /// returning true stops the solve (converged then reflects the residual only).
  std::function<bool(int iteration, std::span<const double> x, double rz)> monitor;
};

/// Conjugate gradients for a symmetric positive-definite map. The reported
/// relative residual is the true residual ||b - A x|| / ||b|| recomputed from
/// the returned x, not the recursively updated one.
SolveResult cg_solve(const LinearMap& apply_operator, std::span<const double> rhs, double tol,
                     int max_iter);
SolveResult cg_solve(const LinearMap& apply_operator, std::span<const double> rhs,
                     const CgOptions& options);

using EnergyFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<Field(std::span<const double>)>;
/// <E'(x), d> given the representative g returned by the gradient function.
using PairingFn = std::function<double(std::span<const double> g, std::span<const double> d)>;
/// Maps a direction into the admissible subspace in place.
using ConstraintFn = std::function<void(std::span<double>)>;

struct FdCheckOptions {
  int n_directions = 5;
  double eps = 1e-5;
  std::uint64_t seed = 0x5eed;
  PairingFn pairing;       // Euclidean dot when empty
  ConstraintFn constrain;  // unconstrained when empty
};

/// max_d |<grad, d> - (E(x+eps d) - E(x-eps d)) / (2 eps)| / (1 + |<grad, d>|)
/// over random unit directions d.
double fd_gradient_check(const EnergyFn& energy, const GradientFn& grad,
                         std::span<const double> point, const FdCheckOptions& options = {});

}  // namespace varerr
