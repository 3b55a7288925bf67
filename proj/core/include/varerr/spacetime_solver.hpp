#pragma once

#include <span>
#include <vector>

#include "varerr/hilbert.hpp"

namespace varerr {

/// Direct solver for the H1_full Gram operator on a 2-D (time, space) grid.
///
/// Unknowns are the nodes with interior space index; the first and last time
/// rows are optionally constrained to zero. The space direction is
/// diagonalized by the discrete sine basis (the lumped interior mass is a
/// multiple of the identity), leaving one tridiagonal time solve per mode.
/// Cost is O(n_t * n_x^2) per solve.
class SpaceTimeH1Solver {
 public:
  SpaceTimeH1Solver(const GridSpec& grid, bool zero_first_row, bool zero_last_row);

  /// Full-grid arrays. Entries of `rhs` at constrained nodes are ignored and
  /// the returned field vanishes there.
  SolveReport solve(std::span<const double> rhs, std::span<double> x) const;

  /// Gram operator restricted to the free nodes (constrained entries zeroed).
  void apply(std::span<const double> x, std::span<double> out) const;

  /// Zeroes the constrained entries in place.
  void mask(std::span<double> x) const;

  [[nodiscard]] bool is_free(int it, int ix) const {
    return it >= row_lo_ && it <= row_hi_ && ix >= 1 && ix <= nx_ - 2;
  }
  [[nodiscard]] const GridSpec& grid() const { return grid_; }

 private:
  GridSpec grid_;
  int nt_ = 0;
  int nx_ = 0;
  int row_lo_ = 0;
  int row_hi_ = 0;
  std::vector<double> sine_;       // (nx-2) x (nx-2), mode-major
  std::vector<double> eig_;        // space stiffness eigenvalues per mode
  std::vector<double> time_mass_;  // lumped time weights per row
  double mode_norm_sq_ = 0.0;
};

}  // namespace varerr
