#include "varerr/spacetime_solver.hpp"

#include <cmath>
#include <numbers>

namespace varerr {

SpaceTimeH1Solver::SpaceTimeH1Solver(const GridSpec& grid, bool zero_first_row, bool zero_last_row)
    : grid_(grid) {
  if (grid_.dims() != 2) throw std::invalid_argument("SpaceTimeH1Solver: grid must be 2-D");
  nt_ = grid_.n(0);
  nx_ = grid_.n(1);
  row_lo_ = zero_first_row ? 1 : 0;
  row_hi_ = zero_last_row ? nt_ - 2 : nt_ - 1;

  const int m = nx_ - 2;
  const double hx = grid_.spacing(1);
  sine_.resize(static_cast<std::size_t>(m) * static_cast<std::size_t>(m));
  eig_.resize(static_cast<std::size_t>(m));
  for (int k = 1; k <= m; ++k) {
    const double theta = std::numbers::pi * k / (nx_ - 1);
    eig_[std::size_t(k - 1)] = 2.0 / hx * (1.0 - std::cos(theta));
    for (int j = 1; j <= m; ++j) {
      sine_[std::size_t(k - 1) * std::size_t(m) + std::size_t(j - 1)] = std::sin(theta * j);
    }
  }
  mode_norm_sq_ = 0.5 * (nx_ - 1);

  const double ht = grid_.spacing(0);
  time_mass_.resize(static_cast<std::size_t>(nt_));
  for (int r = 0; r < nt_; ++r)
    time_mass_[std::size_t(r)] = (r == 0 || r == nt_ - 1) ? 0.5 * ht : ht;
}

void SpaceTimeH1Solver::mask(std::span<double> x) const {
  for (int r = 0; r < nt_; ++r) {
    for (int j = 0; j < nx_; ++j) {
      if (!is_free(r, j)) x[grid_.index(r, j)] = 0.0;
    }
  }
}

void SpaceTimeH1Solver::apply(std::span<const double> x, std::span<double> out) const {
  Field masked(x.begin(), x.end());
  mask(masked);
  gram_apply(InnerProductKind::kH1Full, grid_, masked, out);
  mask(out);
}

SolveReport SpaceTimeH1Solver::solve(std::span<const double> rhs, std::span<double> x) const {
  if (rhs.size() != grid_.size() || x.size() != grid_.size()) {
    throw ShapeError("SpaceTimeH1Solver::solve: size mismatch");
  }
  const int m = nx_ - 2;
  const int rows = row_hi_ - row_lo_ + 1;
  const double ht = grid_.spacing(0);
  const double hx = grid_.spacing(1);

  // Forward sine transform of the free rows.
  std::vector<double> coeff(std::size_t(m) * std::size_t(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    const int it = row_lo_ + r;
    for (int k = 0; k < m; ++k) {
      const double* s = &sine_[std::size_t(k) * std::size_t(m)];
      double acc = 0.0;
      for (int j = 1; j <= m; ++j) acc += s[j - 1] * rhs[grid_.index(it, j)];
      coeff[std::size_t(k) * std::size_t(rows) + std::size_t(r)] = acc;
    }
  }

  // One tridiagonal time problem per mode: hx (M_t + K_t) + lambda_k M_t.
  std::vector<double> cprime(static_cast<std::size_t>(rows)),
      dprime(static_cast<std::size_t>(rows));
  const double off = -hx / ht;
  for (int k = 0; k < m; ++k) {
    double* b = &coeff[std::size_t(k) * std::size_t(rows)];
    const double lambda = eig_[std::size_t(k)];
    auto diag = [&](int r) {
      const int it = row_lo_ + r;
      const double edges = (it == 0 || it == nt_ - 1) ? 1.0 : 2.0;
      const double mass = time_mass_[std::size_t(it)];
      return hx * (mass + edges / ht) + lambda * mass;
    };
    double denom = diag(0);
    cprime[0] = off / denom;
    dprime[0] = b[0] / denom;
    for (int r = 1; r < rows; ++r) {
      denom = diag(r) - off * cprime[std::size_t(r - 1)];
      cprime[std::size_t(r)] = off / denom;
      dprime[std::size_t(r)] = (b[r] - off * dprime[std::size_t(r - 1)]) / denom;
    }
    b[rows - 1] = dprime[std::size_t(rows - 1)];
    for (int r = rows - 2; r >= 0; --r) {
      b[r] = dprime[std::size_t(r)] - cprime[std::size_t(r)] * b[r + 1];
    }
  }

  std::fill(x.begin(), x.end(), 0.0);
  for (int r = 0; r < rows; ++r) {
    const int it = row_lo_ + r;
    for (int j = 1; j <= m; ++j) {
      double acc = 0.0;
      for (int k = 0; k < m; ++k) {
        acc += coeff[std::size_t(k) * std::size_t(rows) + std::size_t(r)] *
               sine_[std::size_t(k) * std::size_t(m) + std::size_t(j - 1)];
      }
      x[grid_.index(it, j)] = acc / mode_norm_sq_;
    }
  }

  Field masked_rhs(rhs.begin(), rhs.end());
  mask(masked_rhs);
  Field ax(grid_.size());
  apply(x, ax);
  double res = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i)
    res += (ax[i] - masked_rhs[i]) * (ax[i] - masked_rhs[i]);
  const double bnorm = norm2(masked_rhs);
  SolveReport report;
  report.iterations = 1;
  report.relative_residual = bnorm > 0.0 ? std::sqrt(res) / bnorm : std::sqrt(res);
  report.converged = report.relative_residual <= 1e-10;
  return report;
}

}  // namespace varerr
