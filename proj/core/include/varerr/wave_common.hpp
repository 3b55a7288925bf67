#pragma once

// Space-time machinery shared by the linear and nonlinear wave problems on
// Q = [0,T] x [0,L]: grid functions are nodal, index(it, ix) with time slowest.
//
// Trial fields vanish at t = 0 and on the lateral boundary. Test fields vanish
// on the lateral boundary and at t = T, which makes the discrete residual map
// square and invertible (leaving the last time row free over-determines the
// discrete problem and its minimum energy stays O(1)).

#include <functional>
#include <random>
#include <span>
#include <string>

#include "varerr/hilbert.hpp"
#include "varerr/spacetime_solver.hpp"

namespace varerr::wave {

enum class FieldClass { kTrial, kTest };

GridSpec make_grid(int nt, int nx, double horizon, double length);

class SpaceTimeOps {
 public:
  explicit SpaceTimeOps(const GridSpec& grid);

  [[nodiscard]] const GridSpec& grid() const { return grid_; }
  [[nodiscard]] int nt() const { return grid_.n(0); }
  [[nodiscard]] int nx() const { return grid_.n(1); }
  [[nodiscard]] double ht() const { return grid_.spacing(0); }
  [[nodiscard]] double hx() const { return grid_.spacing(1); }
  [[nodiscard]] double t(int it) const { return grid_.coordinate(0, it); }
  [[nodiscard]] double x(int ix) const { return grid_.coordinate(1, ix); }
  [[nodiscard]] std::size_t size() const { return grid_.size(); }
  [[nodiscard]] const Field& weights() const { return weights_; }

  [[nodiscard]] bool in_class(FieldClass c, int it, int ix) const;
  /// Zeroes the entries outside the class in place.
  void restrict(FieldClass c, std::span<double> u) const;
  /// Throws ShapeError unless u has grid size and vanishes outside the class.
  void check(FieldClass c, std::span<const double> u, const char* what) const;

  /// out = (S_t - S_x) u on the full grid: w^T out = int u_t w_t - u_x w_x.
  void apply_wave(std::span<const double> u, std::span<double> out) const;
  /// Nodal first differences: central inside, one-sided on the first/last row (column).
  void dt(std::span<const double> u, std::span<double> out) const;
  void dt_transpose(std::span<const double> u, std::span<double> out) const;
  void dx(std::span<const double> u, std::span<double> out) const;
  void dx_transpose(std::span<const double> u, std::span<double> out) const;

  /// H1_full Gram solves on each class.
  [[nodiscard]] const SpaceTimeH1Solver& solver(FieldClass c) const {
    return c == FieldClass::kTrial ? trial_ : test_;
  }
  /// int (a b + a_t b_t + a_x b_x)
  [[nodiscard]] double h1(std::span<const double> a, std::span<const double> b) const;
  [[nodiscard]] double l2(std::span<const double> a, std::span<const double> b) const;

 private:
  GridSpec grid_;
  Field weights_;
  SpaceTimeH1Solver trial_;
  SpaceTimeH1Solver test_;
};

/// Smooth random trial field: sin((m-1/2) pi t/T) sin(k pi x/L), m, k <= 3.
Field random_trial_field(const SpaceTimeOps& ops, std::mt19937_64& rng, double amplitude = 1.0);

/// Samples g(t, x) at every node.
Field sample(const SpaceTimeOps& ops, const std::function<double(double, double)>& g);

/// Solves the H1_full Gram system on a class; throws SolverFailure when the
/// direct solve misses its residual check.
Field gram_solve(const SpaceTimeOps& ops, FieldClass c, std::span<const double> rhs,
                 const char* what);

/// max ||v||_inf / ||v||_H1 over random trial fields (discrete embedding constant).
double estimate_sup_embedding(const SpaceTimeOps& ops, int n_samples, std::uint64_t seed);

}  // namespace varerr::wave
