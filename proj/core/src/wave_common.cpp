#include "varerr/wave_common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "varerr/descent.hpp"

namespace varerr::wave {

GridSpec make_grid(int nt, int nx, double horizon, double length) {
  return GridSpec::rect(Axis{nt, horizon, AxisRole::kTime}, Axis{nx, length, AxisRole::kSpace});
}

SpaceTimeOps::SpaceTimeOps(const GridSpec& grid)
    : grid_(grid),
      weights_(trapezoid_weights(grid)),
      trial_(grid, true, false),
      test_(grid, false, true) {
  if (grid_.dims() != 2 || grid_.axis(0).role != AxisRole::kTime) {
    throw std::invalid_argument("space-time grid must be (time, space)");
  }
}

bool SpaceTimeOps::in_class(FieldClass c, int it, int ix) const {
  if (ix <= 0 || ix >= nx() - 1) return false;
  return c == FieldClass::kTrial ? it >= 1 : it <= nt() - 2;
}

void SpaceTimeOps::restrict(FieldClass c, std::span<double> u) const {
  for (int it = 0; it < nt(); ++it) {
    for (int ix = 0; ix < nx(); ++ix) {
      if (!in_class(c, it, ix)) u[grid_.index(it, ix)] = 0.0;
    }
  }
}

void SpaceTimeOps::check(FieldClass c, std::span<const double> u, const char* what) const {
  if (u.size() != size()) {
    throw ShapeError(std::string(what) + ": field has " + std::to_string(u.size()) +
                     " values, grid expects " + std::to_string(size()));
  }
  for (int it = 0; it < nt(); ++it) {
    for (int ix = 0; ix < nx(); ++ix) {
      if (!in_class(c, it, ix) && u[grid_.index(it, ix)] != 0.0) {
        throw ShapeError(std::string(what) + ": field does not vanish where its class requires");
      }
    }
  }
}

void SpaceTimeOps::apply_wave(std::span<const double> u, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const double ht_ = ht(), hx_ = hx();
  auto wt = [&](int it) { return (it == 0 || it == nt() - 1) ? 0.5 * ht_ : ht_; };
  auto wx = [&](int ix) { return (ix == 0 || ix == nx() - 1) ? 0.5 * hx_ : hx_; };
  for (int it = 0; it < nt(); ++it) {
    for (int ix = 0; ix < nx(); ++ix) {
      const std::size_t p = grid_.index(it, ix);
      if (it + 1 < nt()) {
        const std::size_t q = grid_.index(it + 1, ix);
        const double d = wx(ix) / ht_ * (u[q] - u[p]);
        out[q] += d;
        out[p] -= d;
      }
      if (ix + 1 < nx()) {
        const std::size_t q = grid_.index(it, ix + 1);
        const double d = wt(it) / hx_ * (u[q] - u[p]);
        out[q] -= d;
        out[p] += d;
      }
    }
  }
}

namespace {

// Difference along one axis of a row-major (n0 x n1) array. stride/count
// describe the axis; central inside, one-sided at both ends.
void diff_axis(std::span<const double> u, std::span<double> out, int n0, int n1, int axis,
               double h) {
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      const int k = axis == 0 ? i : j;
      const int n = axis == 0 ? n0 : n1;
      auto at = [&](int kk) {
        return axis == 0 ? u[std::size_t(kk) * std::size_t(n1) + std::size_t(j)]
                         : u[std::size_t(i) * std::size_t(n1) + std::size_t(kk)];
      };
      double d;
      if (k == 0) {
        d = (at(1) - at(0)) / h;
      } else if (k == n - 1) {
        d = (at(n - 1) - at(n - 2)) / h;
      } else {
        d = (at(k + 1) - at(k - 1)) / (2.0 * h);
      }
      out[std::size_t(i) * std::size_t(n1) + std::size_t(j)] = d;
    }
  }
}

void diff_axis_transpose(std::span<const double> u, std::span<double> out, int n0, int n1, int axis,
                         double h) {
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      const int k = axis == 0 ? i : j;
      const int n = axis == 0 ? n0 : n1;
      auto idx = [&](int kk) {
        return axis == 0 ? std::size_t(kk) * std::size_t(n1) + std::size_t(j)
                         : std::size_t(i) * std::size_t(n1) + std::size_t(kk);
      };
      const double c = u[idx(k)];
      if (k == 0) {
        out[idx(1)] += c / h;
        out[idx(0)] -= c / h;
      } else if (k == n - 1) {
        out[idx(n - 1)] += c / h;
        out[idx(n - 2)] -= c / h;
      } else {
        out[idx(k + 1)] += c / (2.0 * h);
        out[idx(k - 1)] -= c / (2.0 * h);
      }
    }
  }
}

}  // namespace

void SpaceTimeOps::dt(std::span<const double> u, std::span<double> out) const {
  diff_axis(u, out, nt(), nx(), 0, ht());
}
void SpaceTimeOps::dt_transpose(std::span<const double> u, std::span<double> out) const {
  diff_axis_transpose(u, out, nt(), nx(), 0, ht());
}
void SpaceTimeOps::dx(std::span<const double> u, std::span<double> out) const {
  diff_axis(u, out, nt(), nx(), 1, hx());
}
void SpaceTimeOps::dx_transpose(std::span<const double> u, std::span<double> out) const {
  diff_axis_transpose(u, out, nt(), nx(), 1, hx());
}

double SpaceTimeOps::h1(std::span<const double> a, std::span<const double> b) const {
  return inner(InnerProductKind::kH1Full, grid_, a, b);
}

double SpaceTimeOps::l2(std::span<const double> a, std::span<const double> b) const {
  return inner(InnerProductKind::kL2, grid_, a, b);
}

Field random_trial_field(const SpaceTimeOps& ops, std::mt19937_64& rng, double amplitude) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double t_end = ops.grid().axis(0).extent;
  const double len = ops.grid().axis(1).extent;
  Field u(ops.size(), 0.0);
  for (int m = 1; m <= 3; ++m) {
    for (int k = 1; k <= 3; ++k) {
      const double c = amplitude * normal(rng) / (m * k);
      for (int it = 0; it < ops.nt(); ++it) {
        const double st = std::sin((m - 0.5) * std::numbers::pi * ops.t(it) / t_end);
        for (int ix = 0; ix < ops.nx(); ++ix) {
          u[ops.grid().index(it, ix)] += c * st * std::sin(k * std::numbers::pi * ops.x(ix) / len);
        }
      }
    }
  }
  ops.restrict(FieldClass::kTrial, u);
  return u;
}

Field sample(const SpaceTimeOps& ops, const std::function<double(double, double)>& g) {
  Field out(ops.size());
  for (int it = 0; it < ops.nt(); ++it) {
    for (int ix = 0; ix < ops.nx(); ++ix) out[ops.grid().index(it, ix)] = g(ops.t(it), ops.x(ix));
  }
  return out;
}

Field gram_solve(const SpaceTimeOps& ops, FieldClass c, std::span<const double> rhs,
                 const char* what) {
  Field x(ops.size());
  const SolveReport r = ops.solver(c).solve(rhs, x);
  if (!r.converged) {
    throw SolverFailure(std::string(what) + ": space-time H1 solve residual " +
                        std::to_string(r.relative_residual));
  }
  return x;
}

double estimate_sup_embedding(const SpaceTimeOps& ops, int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const Field v = random_trial_field(ops, rng);
    double sup = 0.0;
    for (double x : v) sup = std::max(sup, std::abs(x));
    const double h1 = std::sqrt(ops.h1(v, v));
    if (h1 > 0.0) worst = std::max(worst, sup / h1);
  }
  return worst;
}

}  // namespace varerr::wave
