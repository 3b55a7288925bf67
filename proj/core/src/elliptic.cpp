#include "varerr/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace varerr::elliptic {

namespace {

constexpr double kPi = std::numbers::pi;

// Flux-carrying edges are those touching an interior node: x-edges (i,j)-(i+1,j)
// with 0 < j < n-1 and y-edges (i,j)-(i,j+1) with 0 < i < n-1. Each carries the
// normal difference quotient and the average of the four adjacent transverse
// ones, so the full gradient is available at the edge midpoint.
struct EdgeState {
  int n = 0;
  Field xn, xt;  // x-edges: normal (d/dx), transverse (d/dy); (n-1) x n
  Field yn, yt;  // y-edges: normal (d/dy), transverse (d/dx); n x (n-1)

  [[nodiscard]] std::size_t ex(int i, int j) const {
    return std::size_t(i) * std::size_t(n) + std::size_t(j);
  }
  [[nodiscard]] std::size_t ey(int i, int j) const {
    return std::size_t(i) * std::size_t(n - 1) + std::size_t(j);
  }
};

void raw_differences(const GridSpec& g, int n, double h, std::span<const double> u, Field& gx,
                     Field& gy) {
  gx.assign(std::size_t(n - 1) * std::size_t(n), 0.0);
  gy.assign(std::size_t(n) * std::size_t(n - 1), 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j < n; ++j)
      gx[std::size_t(i) * std::size_t(n) + std::size_t(j)] =
          (u[g.index(i + 1, j)] - u[g.index(i, j)]) / h;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j + 1 < n; ++j)
      gy[std::size_t(i) * std::size_t(n - 1) + std::size_t(j)] =
          (u[g.index(i, j + 1)] - u[g.index(i, j)]) / h;
  }
}

EdgeState edge_gradients(const EllipticProblem& p, std::span<const double> u) {
  const int n = p.n();
  EdgeState s;
  s.n = n;
  Field gx, gy;
  raw_differences(p.grid(), n, p.h(), u, gx, gy);
  s.xn = gx;
  s.yn = gy;
  s.xt.assign(gx.size(), 0.0);
  s.yt.assign(gy.size(), 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 1; j + 1 < n; ++j) {
      s.xt[s.ex(i, j)] = 0.25 * (gy[s.ey(i, j - 1)] + gy[s.ey(i, j)] + gy[s.ey(i + 1, j - 1)] +
                                 gy[s.ey(i + 1, j)]);
    }
  }
  for (int i = 1; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      s.yt[s.ey(i, j)] = 0.25 * (gx[s.ex(i - 1, j)] + gx[s.ex(i, j)] + gx[s.ex(i - 1, j + 1)] +
                                 gx[s.ex(i, j + 1)]);
    }
  }
  return s;
}

Field full_field(const EllipticProblem& p, std::span<const double> v) {
  if (v.size() != p.grid().size()) {
    throw ShapeError("elliptic: field has " + std::to_string(v.size()) + " values, grid expects " +
                     std::to_string(p.grid().size()));
  }
  Field u(v.begin(), v.end());
  p.mask(u);
  for (int i = 0; i < p.n(); ++i) {
    for (int j = 0; j < p.n(); ++j) {
      if (!p.interior(i, j)) u[p.grid().index(i, j)] = p.lift()[p.grid().index(i, j)];
    }
  }
  return u;
}

// R(v) = sum over edges of h^2 Phi . grad(test) + lumped g.
Field assemble_residual(const EllipticProblem& p, std::span<const double> v) {
  const Field u = full_field(p, v);
  const EdgeState s = edge_gradients(p, u);
  const int n = p.n();
  const double h = p.h();
  const GridSpec& g = p.grid();
  Field r(g.size(), 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 1; j + 1 < n; ++j) {
      const double q = h * p.flux().value(s.xn[s.ex(i, j)], s.xt[s.ex(i, j)])[0];
      r[g.index(i + 1, j)] += q;
      r[g.index(i, j)] -= q;
    }
  }
  for (int i = 1; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const double q = h * p.flux().value(s.yt[s.ey(i, j)], s.yn[s.ey(i, j)])[1];
      r[g.index(i, j + 1)] += q;
      r[g.index(i, j)] -= q;
    }
  }
  if (!p.forcing().empty()) {
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += h * h * p.forcing()[k];
  }
  p.mask(r);
  return r;
}

struct EdgeJacobians {
  std::vector<std::array<double, 4>> x, y;
  double max_cross = 0.0;
  bool violation = false;
};

EdgeJacobians edge_jacobians(const EllipticProblem& p, std::span<const double> v) {
  const Field u = full_field(p, v);
  const EdgeState s = edge_gradients(p, u);
  const int n = p.n();
  EdgeJacobians jac;
  jac.x.assign(s.xn.size(), {0.0, 0.0, 0.0, 0.0});
  jac.y.assign(s.yn.size(), {0.0, 0.0, 0.0, 0.0});
  auto inspect = [&](const std::array<double, 4>& m) {
    jac.max_cross = std::max({jac.max_cross, std::abs(m[1]), std::abs(m[2])});
    // Smallest eigenvalue of the symmetric part.
    const double a = m[0], d = m[3], b = 0.5 * (m[1] + m[2]);
    const double lmin = 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + b * b);
    if (!(lmin > 0.0)) jac.violation = true;
  };
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 1; j + 1 < n; ++j) {
      jac.x[s.ex(i, j)] = p.flux().jacobian(s.xn[s.ex(i, j)], s.xt[s.ex(i, j)]);
      inspect(jac.x[s.ex(i, j)]);
    }
  }
  for (int i = 1; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      jac.y[s.ey(i, j)] = p.flux().jacobian(s.yt[s.ey(i, j)], s.yn[s.ey(i, j)]);
      inspect(jac.y[s.ey(i, j)]);
    }
  }
  return jac;
}

// out = J dv for zero-Dirichlet dv.
void jacobian_apply(const EllipticProblem& p, const EdgeJacobians& jac, std::span<const double> dv,
                    std::span<double> out) {
  Field masked(dv.begin(), dv.end());
  p.mask(masked);
  const EdgeState s = edge_gradients(p, masked);
  const int n = p.n();
  const double h = p.h();
  const GridSpec& g = p.grid();
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 1; j + 1 < n; ++j) {
      const auto& m = jac.x[s.ex(i, j)];
      const double q = h * (m[0] * s.xn[s.ex(i, j)] + m[1] * s.xt[s.ex(i, j)]);
      out[g.index(i + 1, j)] += q;
      out[g.index(i, j)] -= q;
    }
  }
  for (int i = 1; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const auto& m = jac.y[s.ey(i, j)];
      const double q = h * (m[2] * s.yt[s.ey(i, j)] + m[3] * s.yn[s.ey(i, j)]);
      out[g.index(i, j + 1)] += q;
      out[g.index(i, j)] -= q;
    }
  }
  p.mask(out);
}

// out = J^T w for zero-Dirichlet w.
void jacobian_transpose_apply(const EllipticProblem& p, const EdgeJacobians& jac,
                              std::span<const double> w, std::span<double> out) {
  const int n = p.n();
  const double h = p.h();
  const GridSpec& g = p.grid();
  Field wm(w.begin(), w.end());
  p.mask(wm);
  // Adjoint accumulators for the raw difference quotients on every edge.
  Field cx(std::size_t(n - 1) * std::size_t(n), 0.0);
  Field cy(std::size_t(n) * std::size_t(n - 1), 0.0);
  auto ex = [n](int i, int j) { return std::size_t(i) * std::size_t(n) + std::size_t(j); };
  auto ey = [n](int i, int j) { return std::size_t(i) * std::size_t(n - 1) + std::size_t(j); };
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 1; j + 1 < n; ++j) {
      const auto& m = jac.x[ex(i, j)];
      const double q = h * (wm[g.index(i + 1, j)] - wm[g.index(i, j)]);
      cx[ex(i, j)] += q * m[0];
      const double t = 0.25 * q * m[1];
      cy[ey(i, j - 1)] += t;
      cy[ey(i, j)] += t;
      cy[ey(i + 1, j - 1)] += t;
      cy[ey(i + 1, j)] += t;
    }
  }
  for (int i = 1; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const auto& m = jac.y[ey(i, j)];
      const double q = h * (wm[g.index(i, j + 1)] - wm[g.index(i, j)]);
      cy[ey(i, j)] += q * m[3];
      const double t = 0.25 * q * m[2];
      cx[ex(i - 1, j)] += t;
      cx[ex(i, j)] += t;
      cx[ex(i - 1, j + 1)] += t;
      cx[ex(i, j + 1)] += t;
    }
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double c = cx[ex(i, j)] / h;
      out[g.index(i + 1, j)] += c;
      out[g.index(i, j)] -= c;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const double c = cy[ey(i, j)] / h;
      out[g.index(i, j + 1)] += c;
      out[g.index(i, j)] -= c;
    }
  }
  p.mask(out);
}

FieldSolve poisson_solve(const EllipticProblem& p, std::span<const double> rhs) {
  const LinearMap a = [&p](std::span<const double> x, std::span<double> y) {
    p.apply_laplacian(x, y);
  };
  SolveResult r = cg_solve(a, rhs, p.settings().cg_tol, p.settings().cg_max_iter);
  p.mask(r.x);
  return {std::move(r.x), r.report};
}

void require(const SolveReport& report, const char* what) {
  if (!report.converged) {
    throw SolverFailure(std::string(what) + ": CG did not converge (relative residual " +
                        std::to_string(report.relative_residual) + " after " +
                        std::to_string(report.iterations) + " iterations)");
  }
}

template <typename F, typename D>
FluxMap componentwise(std::string name, double bound, double mono, F f, D df) {
  FluxMap m;
  m.name = std::move(name);
  m.bound = bound;
  m.monotonicity = mono;
  m.value = [f](double ax, double ay) { return std::array<double, 2>{f(ax), f(ay)}; };
  m.jacobian = [df](double ax, double ay) {
    return std::array<double, 4>{df(ax), 0.0, 0.0, df(ay)};
  };
  return m;
}

double spectral_norm2(const std::array<double, 4>& m) {
  // Largest singular value of a 2x2 matrix.
  const double a = m[0], b = m[1], c = m[2], d = m[3];
  const double s1 = a * a + b * b + c * c + d * d;
  const double det = a * d - b * c;
  const double disc = std::sqrt(std::max(0.0, s1 * s1 - 4.0 * det * det));
  return std::sqrt(0.5 * (s1 + disc));
}

}  // namespace

FluxMap identity_flux() {
  return componentwise(
      "identity", 1.0, 1.0, [](double a) { return a; }, [](double) { return 1.0; });
}

FluxMap arctan_flux() {
  return componentwise(
      "2a+arctan", 3.0, 2.0, [](double a) { return 2.0 * a + std::atan(a); },
      [](double a) { return 2.0 + 1.0 / (1.0 + a * a); });
}

FluxMap saturating_flux() {
  FluxMap m;
  m.name = "a/(1+|a|^2)";
  m.bound = 1.0;
  m.monotonicity = -0.125;
  m.value = [](double ax, double ay) {
    const double s = 1.0 / (1.0 + ax * ax + ay * ay);
    return std::array<double, 2>{ax * s, ay * s};
  };
  m.jacobian = [](double ax, double ay) {
    const double s = 1.0 / (1.0 + ax * ax + ay * ay);
    const double s2 = 2.0 * s * s;
    return std::array<double, 4>{s - s2 * ax * ax, -s2 * ax * ay, -s2 * ax * ay, s - s2 * ay * ay};
  };
  return m;
}

FluxMap make_flux(const std::string& name) {
  if (name == "identity") return identity_flux();
  if (name == "2a+arctan" || name == "arctan") return arctan_flux();
  if (name == "a/(1+|a|^2)" || name == "saturating") return saturating_flux();
  throw std::invalid_argument("unknown flux '" + name +
                              "' (expected identity|2a+arctan|a/(1+|a|^2))");
}

EllipticProblem::EllipticProblem(FluxMap flux, int n, Field lift, Field forcing,
                                 SolverSettings settings)
    : flux_(std::move(flux)),
      n_(n),
      grid_(GridSpec::rect(Axis{n, 1.0, AxisRole::kSpace}, Axis{n, 1.0, AxisRole::kSpace})),
      lift_(std::move(lift)),
      forcing_(std::move(forcing)),
      settings_(settings) {
  if (lift_.empty()) lift_.assign(grid_.size(), 0.0);
  if (lift_.size() != grid_.size()) throw ShapeError("elliptic: lift size does not match grid");
  if (!forcing_.empty() && forcing_.size() != grid_.size()) {
    throw ShapeError("elliptic: forcing size does not match grid");
  }
  for (double x : lift_) {
    if (!std::isfinite(x)) throw std::invalid_argument("elliptic: lift must be finite");
  }
  if (!flux_.value || !flux_.jacobian) throw std::invalid_argument("elliptic: incomplete flux");
  if (!(settings_.cg_tol > 0.0)) throw std::invalid_argument("elliptic: cg_tol must be positive");
}

void EllipticProblem::mask(std::span<double> v) const {
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      if (!interior(i, j)) v[grid_.index(i, j)] = 0.0;
    }
  }
}

void EllipticProblem::apply_laplacian(std::span<const double> v, std::span<double> out) const {
  Field masked(v.begin(), v.end());
  mask(masked);
  gram_apply(InnerProductKind::kH1Semi, grid_, masked, out);
  mask(out);
}

Manufactured manufactured(const FluxMap& flux, int n, double amplitude, SolverSettings settings) {
  const GridSpec g = GridSpec::rect(Axis{n, 1.0, AxisRole::kSpace}, Axis{n, 1.0, AxisRole::kSpace});
  Field exact(g.size()), forcing(g.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = g.coordinate(0, i), y = g.coordinate(1, j);
      const double sx = std::sin(kPi * x), cx = std::cos(kPi * x);
      const double sy = std::sin(kPi * y), cy = std::cos(kPi * y);
      exact[g.index(i, j)] = amplitude * sx * sy;
      const double ux = amplitude * kPi * cx * sy, uy = amplitude * kPi * sx * cy;
      const double uxx = -amplitude * kPi * kPi * sx * sy, uyy = uxx;
      const double uxy = amplitude * kPi * kPi * cx * cy;
      const auto m = flux.jacobian(ux, uy);
      forcing[g.index(i, j)] = m[0] * uxx + (m[1] + m[2]) * uxy + m[3] * uyy;
    }
  }
  for (int i = 0; i < n; ++i) {
    exact[g.index(i, 0)] = exact[g.index(i, n - 1)] = 0.0;
    exact[g.index(0, i)] = exact[g.index(n - 1, i)] = 0.0;
  }
  return {EllipticProblem(flux, n, {}, std::move(forcing), settings), std::move(exact)};
}

FieldSolve residual(const EllipticProblem& p, std::span<const double> v) {
  Field r = assemble_residual(p, v);
  scale(-1.0, r);
  return poisson_solve(p, r);
}

double energy(const EllipticProblem& p, std::span<const double> v) {
  const FieldSolve u = residual(p, v);
  require(u.report, "elliptic residual");
  return 0.5 * h1_semi(p, u.field, u.field);
}

Field euclidean_gradient(const EllipticProblem& p, std::span<const double> v) {
  const FieldSolve u = residual(p, v);
  require(u.report, "elliptic residual");
  const EdgeJacobians jac = edge_jacobians(p, v);
  Field e(p.grid().size());
  jacobian_transpose_apply(p, jac, u.field, e);
  scale(-1.0, e);
  return e;
}

FieldSolve gradient(const EllipticProblem& p, std::span<const double> v) {
  const Field e = euclidean_gradient(p, v);
  return poisson_solve(p, e);
}

NewtonStep newton_step(const EllipticProblem& p, std::span<const double> v) {
  const EdgeJacobians jac = edge_jacobians(p, v);
  Field rhs = assemble_residual(p, v);
  scale(-1.0, rhs);
  NewtonStep out;
  out.monotonicity_violation = jac.violation;
  out.symmetric = jac.max_cross < 1e-12 && !jac.violation;
  const LinearMap japply = [&](std::span<const double> x, std::span<double> y) {
    jacobian_apply(p, jac, x, y);
  };
  SolveResult sol;
  if (out.symmetric) {
    sol = cg_solve(japply, rhs, p.settings().cg_tol, p.settings().cg_max_iter);
  } else {
    Field tmp(p.grid().size());
    const LinearMap normal = [&](std::span<const double> x, std::span<double> y) {
      jacobian_apply(p, jac, x, tmp);
      jacobian_transpose_apply(p, jac, tmp, y);
    };
    Field nrhs(p.grid().size());
    jacobian_transpose_apply(p, jac, rhs, nrhs);
    sol = cg_solve(normal, nrhs, p.settings().cg_tol, 4 * p.settings().cg_max_iter);
  }
  p.mask(sol.x);
  out.step = std::move(sol.x);
  out.report = sol.report;
  // <E'(v), V> = -U^T J V
  const FieldSolve u = residual(p, v);
  Field jv(p.grid().size());
  jacobian_apply(p, jac, out.step, jv);
  out.pairing = -dot(u.field, jv);
  return out;
}

DescentResult descend(const EllipticProblem& p, Field v0, Policy policy,
                      const DescentOptions& options) {
  if (v0.size() != p.grid().size()) throw ShapeError("elliptic::descend: initial field size");
  p.mask(v0);
  DescentProblem problem;
  problem.energy = [&p](std::span<const double> v) { return energy(p, v); };
  problem.direction = [&p, policy](std::span<const double> v, double) {
    Direction d;
    const Field e = euclidean_gradient(p, v);
    const FieldSolve g = poisson_solve(p, e);
    require(g.report, "elliptic gradient");
    d.grad_norm = std::sqrt(std::max(0.0, dot(g.field, e)));
    d.inner_iterations = g.report.iterations;
    if (policy == Policy::kNewton) {
      NewtonStep step = newton_step(p, v);
      if (step.monotonicity_violation) {
        throw SolverFailure("Newton system not coercive: flux monotonicity violated");
      }
      require(step.report, "elliptic Newton step");
      d.inner_iterations += step.report.iterations;
      d.direction = std::move(step.step);
      d.slope = dot(e, d.direction);
    } else {
      d.direction = g.field;
      scale(-1.0, d.direction);
      d.slope = -dot(g.field, e);
    }
    return d;
  };
  return armijo_descent(problem, std::move(v0), options);
}

FluxHypotheses check_flux_hypotheses(const FluxMap& flux, double lo, double hi, int n_samples,
                                     std::uint64_t seed) {
  if (n_samples < 100) throw std::invalid_argument("check_flux_hypotheses: need >= 100 samples");
  if (!(hi > lo)) throw std::invalid_argument("check_flux_hypotheses: empty box");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  FluxHypotheses out;
  out.min_monotonicity = std::numeric_limits<double>::infinity();
  const double mid = 0.5 * (lo + hi);
  for (int s = 0; s < n_samples; ++s) {
    const double a0x = s == 0 ? mid : uni(rng), a0y = s == 0 ? mid : uni(rng);
    double a1x = uni(rng), a1y = uni(rng);
    if (a1x == a0x && a1y == a0y) a1x += 1e-3 * (hi - lo);
    out.max_gradient = std::max(out.max_gradient, spectral_norm2(flux.jacobian(a0x, a0y)));
    const auto f0 = flux.value(a0x, a0y), f1 = flux.value(a1x, a1y);
    const double dx = a1x - a0x, dy = a1y - a0y;
    const double q = ((f1[0] - f0[0]) * dx + (f1[1] - f0[1]) * dy) / (dx * dx + dy * dy);
    out.min_monotonicity = std::min(out.min_monotonicity, q);
  }
  out.monotone = out.min_monotonicity > 0.0;
  return out;
}

double h1_semi(const EllipticProblem& p, std::span<const double> a, std::span<const double> b) {
  return inner(InnerProductKind::kH1Semi, p.grid(), a, b);
}

double l2_error(const EllipticProblem& p, std::span<const double> a, std::span<const double> b) {
  const Field d = lincomb(1.0, a, -1.0, b);
  return norm(InnerProductKind::kL2, p.grid(), d);
}

Field random_field(const EllipticProblem& p, std::mt19937_64& rng, double amplitude) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const GridSpec& g = p.grid();
  Field v(g.size(), 0.0);
  for (int mx = 1; mx <= 3; ++mx) {
    for (int my = 1; my <= 3; ++my) {
      const double c = amplitude * normal(rng) / (mx * my);
      for (int i = 0; i < p.n(); ++i) {
        for (int j = 0; j < p.n(); ++j) {
          v[g.index(i, j)] +=
              c * std::sin(mx * kPi * g.coordinate(0, i)) * std::sin(my * kPi * g.coordinate(1, j));
        }
      }
    }
  }
  p.mask(v);
  return v;
}

}  // namespace varerr::elliptic
