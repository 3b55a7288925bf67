#include "varerr/navier_stokes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace varerr::ns {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kNone = static_cast<std::size_t>(-1);

void check_velocity(const MacOps& ops, std::span<const double> w, const char* what) {
  if (w.size() != ops.size()) {
    throw ShapeError(std::string(what) + ": velocity has " + std::to_string(w.size()) +
                     " values, grid expects " + std::to_string(ops.size()));
  }
}

void require(const SolveReport& r, const char* what) {
  if (!r.converged) {
    throw SolverFailure(std::string(what) + ": solve did not converge (relative residual " +
                        std::to_string(r.relative_residual) + ")");
  }
}

}  // namespace

MacOps::MacOps(int n) : n_(n) {
  if (n_ < 4) throw std::invalid_argument("MAC grid needs at least 4 cells per side");
  const double h = 1.0 / n_;
  const double c2 = 1.0 / (2.0 * h);

  // Stencil of (a . grad) b. Wall-normal faces are absent (zero) and the
  // tangential ghost across a wall is minus the interior value.
  auto u_at = [&](int i, int j) -> std::pair<std::size_t, double> {
    if (i <= 0 || i >= n_) return {kNone, 0.0};
    if (j < 0) return {u_index(i, 0), -1.0};
    if (j >= n_) return {u_index(i, n_ - 1), -1.0};
    return {u_index(i, j), 1.0};
  };
  auto v_at = [&](int i, int j) -> std::pair<std::size_t, double> {
    if (j <= 0 || j >= n_) return {kNone, 0.0};
    if (i < 0) return {v_index(0, j), -1.0};
    if (i >= n_) return {v_index(n_ - 1, j), -1.0};
    return {v_index(i, j), 1.0};
  };
  // Wall faces of the advecting field contribute nothing to averages.
  auto a_u = [&](int i, int j) { return (i <= 0 || i >= n_) ? kNone : u_index(i, j); };
  auto a_v = [&](int i, int j) { return (j <= 0 || j >= n_) ? kNone : v_index(i, j); };

  auto push = [&](std::size_t out, std::pair<std::size_t, double> in, std::size_t a, double coef) {
    if (in.first == kNone || a == kNone) return;
    entries_.push_back({out, in.first, a, coef * in.second});
  };

  for (int i = 1; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      const std::size_t o = u_index(i, j);
      push(o, u_at(i + 1, j), o, c2);
      push(o, u_at(i - 1, j), o, -c2);
      const std::size_t av[4] = {a_v(i - 1, j), a_v(i, j), a_v(i - 1, j + 1), a_v(i, j + 1)};
      for (std::size_t f : av) {
        push(o, u_at(i, j + 1), f, 0.25 * c2);
        push(o, u_at(i, j - 1), f, -0.25 * c2);
      }
    }
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 1; j < n_; ++j) {
      const std::size_t o = v_index(i, j);
      push(o, v_at(i, j + 1), o, c2);
      push(o, v_at(i, j - 1), o, -c2);
      const std::size_t au[4] = {a_u(i, j - 1), a_u(i + 1, j - 1), a_u(i, j), a_u(i + 1, j)};
      for (std::size_t f : au) {
        push(o, v_at(i + 1, j), f, 0.25 * c2);
        push(o, v_at(i - 1, j), f, -0.25 * c2);
      }
    }
  }

  cosines_.resize(std::size_t(n_) * std::size_t(n_));
  eig_.resize(static_cast<std::size_t>(n_));
  for (int k = 0; k < n_; ++k) {
    eig_[std::size_t(k)] = (2.0 - 2.0 * std::cos(kPi * k / n_)) / (h * h);
    for (int i = 0; i < n_; ++i) {
      cosines_[std::size_t(k) * std::size_t(n_) + std::size_t(i)] =
          std::cos(kPi * k * (i + 0.5) / n_);
    }
  }
}

void MacOps::divergence(std::span<const double> w, std::span<double> out) const {
  const double h = this->h();
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      const double ur = i + 1 < n_ ? w[u_index(i + 1, j)] : 0.0;
      const double ul = i > 0 ? w[u_index(i, j)] : 0.0;
      const double vt = j + 1 < n_ ? w[v_index(i, j + 1)] : 0.0;
      const double vb = j > 0 ? w[v_index(i, j)] : 0.0;
      out[cell(i, j)] = (ur - ul + vt - vb) / h;
    }
  }
}

void MacOps::divergence_transpose(std::span<const double> p, std::span<double> out) const {
  const double h = this->h();
  for (int i = 1; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) out[u_index(i, j)] = (p[cell(i - 1, j)] - p[cell(i, j)]) / h;
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 1; j < n_; ++j) out[v_index(i, j)] = (p[cell(i, j - 1)] - p[cell(i, j)]) / h;
  }
}

SolveReport MacOps::poisson(std::span<const double> s, std::span<double> phi) const {
  const auto n = std::size_t(n_);
  // Forward transform in both directions.
  std::vector<double> tmp(n * n, 0.0), hat(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double* ck = &cosines_[k * n];
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += ck[i] * s[i * n + j];
      tmp[k * n + j] = acc;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      const double* cl = &cosines_[l * n];
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += cl[j] * tmp[k * n + j];
      const double norm_k = k == 0 ? double(n) : 0.5 * double(n);
      const double norm_l = l == 0 ? double(n) : 0.5 * double(n);
      const double lambda = eig_[k] + eig_[l];
      hat[k * n + l] = (k == 0 && l == 0) ? 0.0 : acc / (lambda * norm_k * norm_l);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < n; ++l) acc += cosines_[l * n + j] * hat[k * n + l];
      tmp[k * n + j] = acc;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += cosines_[k * n + i] * tmp[k * n + j];
      phi[i * n + j] = acc;
    }
  }
  // Residual check on the zero-mean part of the data.
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= double(n * n);
  Field g(size()), back(n_cells());
  divergence_transpose(phi, g);
  divergence(g, back);
  double res = 0.0, bnorm = 0.0;
  for (std::size_t c = 0; c < n * n; ++c) {
    res += (back[c] - (s[c] - mean)) * (back[c] - (s[c] - mean));
    bnorm += (s[c] - mean) * (s[c] - mean);
  }
  SolveReport r;
  r.iterations = 1;
  r.relative_residual = bnorm > 0.0 ? std::sqrt(res / bnorm) : std::sqrt(res);
  r.converged = r.relative_residual <= 1e-10;
  return r;
}

void MacOps::stiffness(std::span<const double> w, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  auto pair = [&](std::size_t p, std::size_t q) {
    const double d = w[q] - w[p];
    out[q] += d;
    out[p] -= d;
  };
  for (int j = 0; j < n_; ++j) {
    // u along x: faces 0 and n are zero.
    for (int i = 1; i < n_; ++i) {
      if (i + 1 < n_) pair(u_index(i, j), u_index(i + 1, j));
    }
    out[u_index(1, j)] += w[u_index(1, j)];
    out[u_index(n_ - 1, j)] += w[u_index(n_ - 1, j)];
  }
  for (int i = 1; i < n_; ++i) {
    // u along y: ghost -u across the walls gives (2u)^2/2 per wall.
    for (int j = 0; j + 1 < n_; ++j) pair(u_index(i, j), u_index(i, j + 1));
    out[u_index(i, 0)] += 2.0 * w[u_index(i, 0)];
    out[u_index(i, n_ - 1)] += 2.0 * w[u_index(i, n_ - 1)];
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 1; j + 1 < n_; ++j) pair(v_index(i, j), v_index(i, j + 1));
    out[v_index(i, 1)] += w[v_index(i, 1)];
    out[v_index(i, n_ - 1)] += w[v_index(i, n_ - 1)];
  }
  for (int j = 1; j < n_; ++j) {
    for (int i = 0; i + 1 < n_; ++i) pair(v_index(i, j), v_index(i + 1, j));
    out[v_index(0, j)] += 2.0 * w[v_index(0, j)];
    out[v_index(n_ - 1, j)] += 2.0 * w[v_index(n_ - 1, j)];
  }
}

double MacOps::k_inner(std::span<const double> a, std::span<const double> b) const {
  Field kb(size());
  stiffness(b, kb);
  return dot(a, kb);
}

void MacOps::convection(std::span<const double> a, std::span<const double> b,
                        std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (const Entry& e : entries_) out[e.out] += e.coef * a[e.a] * b[e.in];
}

void MacOps::skew_convection(std::span<const double> a, std::span<const double> b,
                             std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const double c = 0.5 / (n_ * n_);
  for (const Entry& e : entries_) {
    const double s = c * e.coef * a[e.a];
    out[e.out] += s * b[e.in];
    out[e.in] -= s * b[e.out];
  }
}

void MacOps::skew_convection_da(std::span<const double> b, std::span<const double> c,
                                std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const double k = 0.5 / (n_ * n_);
  for (const Entry& e : entries_) {
    out[e.a] += k * e.coef * (c[e.out] * b[e.in] - b[e.out] * c[e.in]);
  }
}

double MacOps::trilinear(std::span<const double> a, std::span<const double> b,
                         std::span<const double> c) const {
  Field sb(size());
  skew_convection(a, b, sb);
  return dot(c, sb);
}

double MacOps::trilinear_naive(std::span<const double> a, std::span<const double> b,
                               std::span<const double> c) const {
  Field cb(size());
  convection(a, b, cb);
  return dot(c, cb) / (n_ * n_);
}

Field MacOps::sample(const std::function<double(double, double)>& fu,
                     const std::function<double(double, double)>& fv) const {
  const double h = this->h();
  Field out(size());
  for (int i = 1; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) out[u_index(i, j)] = fu(i * h, (j + 0.5) * h);
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 1; j < n_; ++j) out[v_index(i, j)] = fv((i + 0.5) * h, j * h);
  }
  return out;
}

Field MacOps::curl(const std::function<double(double, double)>& psi) const {
  const double h = this->h();
  Field out(size());
  for (int i = 1; i < n_; ++i) {
    for (int j = 0; j < n_; ++j)
      out[u_index(i, j)] = (psi(i * h, (j + 1) * h) - psi(i * h, j * h)) / h;
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 1; j < n_; ++j)
      out[v_index(i, j)] = -(psi((i + 1) * h, j * h) - psi(i * h, j * h)) / h;
  }
  return out;
}

Projection leray_project(const MacOps& ops, std::span<const double> w) {
  check_velocity(ops, w, "leray_project");
  for (double x : w) {
    if (!std::isfinite(x)) throw std::invalid_argument("leray_project: non-finite input");
  }
  Field div(ops.n_cells()), phi(ops.n_cells()), g(ops.size());
  ops.divergence(w, div);
  scale(-1.0, div);
  Projection p;
  p.report = ops.poisson(div, phi);
  require(p.report, "pressure Poisson");
  // D D^T phi = -D w  =>  w + D^T phi is divergence-free.
  ops.divergence_transpose(phi, g);
  p.velocity.assign(w.begin(), w.end());
  axpy(1.0, g, p.velocity);
  p.pressure = std::move(phi);
  return p;
}

double max_divergence(const MacOps& ops, std::span<const double> w) {
  Field div(ops.n_cells());
  ops.divergence(w, div);
  double m = 0.0;
  for (double d : div) m = std::max(m, std::abs(d));
  return m;
}

NSProblem::NSProblem(int n, double nu, Field force, NsSettings settings)
    : ops_(n), nu_(nu), force_(std::move(force)), settings_(settings) {
  if (!(nu_ > 0.0) || !std::isfinite(nu_))
    throw std::invalid_argument("viscosity must be positive");
  if (force_.empty()) force_.assign(ops_.size(), 0.0);
  check_velocity(ops_, force_, "NSProblem force");
  if (!(settings_.cg_tol > 0.0)) throw std::invalid_argument("cg_tol must be positive");
}

Manufactured manufactured(int n, double nu, double amplitude) {
  const double a = amplitude;
  const double pi = kPi, pi2 = pi * pi, pi3 = pi2 * pi;
  auto s = [](double x) { return std::sin(x); };
  auto c = [](double x) { return std::cos(x); };
  auto fu = [=](double x, double y) {
    const double sx = s(pi * x), s2x = s(2 * pi * x), c2x = c(2 * pi * x);
    const double s2y = s(2 * pi * y), c2y = c(2 * pi * y), sy = s(pi * y);
    const double u = a * pi * sx * sx * s2y, v = -a * pi * s2x * sy * sy;
    const double ux = a * pi2 * s2x * s2y, uy = 2 * a * pi2 * sx * sx * c2y;
    const double uxx = 2 * a * pi3 * c2x * s2y, uyy = -4 * a * pi3 * sx * sx * s2y;
    const double px = -pi * s(pi * x) * c(pi * y);
    return -nu * (uxx + uyy) + u * ux + v * uy + px;
  };
  auto fv = [=](double x, double y) {
    const double sx = s(pi * x), s2x = s(2 * pi * x), c2x = c(2 * pi * x);
    const double s2y = s(2 * pi * y), c2y = c(2 * pi * y), sy = s(pi * y);
    const double u = a * pi * sx * sx * s2y, v = -a * pi * s2x * sy * sy;
    const double vx = -2 * a * pi2 * c2x * sy * sy, vy = -a * pi2 * s2x * s2y;
    const double vxx = 4 * a * pi3 * s2x * sy * sy, vyy = -2 * a * pi3 * s2x * c2y;
    const double py = -pi * c(pi * x) * s(pi * y);
    return -nu * (vxx + vyy) + u * vx + v * vy + py;
  };
  const MacOps ops(n);
  Manufactured m;
  m.force = ops.sample(fu, fv);
  m.exact = ops.curl([=](double x, double y) {
    const double sx = s(pi * x), sy = s(pi * y);
    return a * sx * sx * sy * sy;
  });
  m.exact_pressure.resize(ops.n_cells());
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = c(pi * (i + 0.5) / n) * c(pi * (j + 0.5) / n);
      m.exact_pressure[ops.cell(i, j)] = v;
      mean += v;
    }
  }
  mean /= double(n * n);
  for (double& v : m.exact_pressure) v -= mean;
  return m;
}

Field gaussian_vortex_force(int n, double amplitude, double x0, double y0, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian vortex width must be positive");
  const MacOps ops(n);
  auto env = [=](double x, double y) {
    return amplitude * std::exp(-((x - x0) * (x - x0) + (y - y0) * (y - y0)) / (width * width));
  };
  return ops.sample([=](double x, double y) { return -(y - y0) * env(x, y); },
                    [=](double x, double y) { return (x - x0) * env(x, y); });
}

namespace {

// CG on P K within the divergence-free space.
SolveResult projected_solve(const NSProblem& p, std::span<const double> rhs) {
  const MacOps& ops = p.ops();
  Field k(ops.size());
  // P K P: projecting the input too keeps the map symmetric when roundoff
  // pushes Krylov vectors off the divergence-free space.
  const LinearMap a = [&](std::span<const double> x, std::span<double> y) {
    const Projection px = leray_project(ops, x);
    ops.stiffness(px.velocity, k);
    const Projection pk = leray_project(ops, k);
    std::copy(pk.velocity.begin(), pk.velocity.end(), y.begin());
  };
  const Projection b = leray_project(ops, rhs);
  CgOptions cg;
  cg.tol = p.settings().cg_tol;
  cg.max_iter = p.settings().cg_max_iter;
  // Near a solution P rhs is a small remainder of a large gradient part; the
  // projection's roundoff scales with the unprojected data.
  cg.reference_norm = norm2(rhs);
  SolveResult r = cg_solve(a, b.velocity, cg);
  r.x = leray_project(ops, r.x).velocity;
  return r;
}

// -nu K u - S_u u + h^2 f
Field residual_rhs(const NSProblem& p, std::span<const double> u) {
  const MacOps& ops = p.ops();
  Field r(ops.size()), s(ops.size());
  ops.stiffness(u, r);
  ops.skew_convection(u, u, s);
  const double h2 = ops.h() * ops.h();
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = -p.nu() * r[k] - s[k] + h2 * p.force()[k];
  return r;
}

}  // namespace

Residual residual(const NSProblem& p, std::span<const double> u) {
  const MacOps& ops = p.ops();
  check_velocity(ops, u, "ns::residual");
  const Field r = residual_rhs(p, u);
  SolveResult sol = projected_solve(p, r);
  Residual out;
  out.velocity = std::move(sol.x);
  out.report = sol.report;
  // K U - r lies in the range of the face gradient -D^T; recover the multiplier.
  Field y(ops.size()), dy(ops.n_cells()), q(ops.n_cells());
  ops.stiffness(out.velocity, y);
  axpy(-1.0, r, y);
  ops.divergence(y, dy);
  scale(-1.0, dy);
  ops.poisson(dy, q);
  const double h2 = ops.h() * ops.h();
  for (double& v : q) v = -v / h2;
  out.pressure = std::move(q);
  return out;
}

double energy(const NSProblem& p, std::span<const double> u) {
  const Residual r = residual(p, u);
  require(r.report, "ns residual");
  return 0.5 * p.ops().k_inner(r.velocity, r.velocity);
}

namespace {

Field euclidean_from(const NSProblem& p, std::span<const double> u, std::span<const double> big_u) {
  const MacOps& ops = p.ops();
  Field e(ops.size()), s(ops.size()), da(ops.size());
  ops.stiffness(big_u, e);
  scale(-p.nu(), e);
  ops.skew_convection(u, big_u, s);
  ops.skew_convection_da(u, big_u, da);
  // d/du of U^T(-S_u u) = -S_u^T U - d_a(U^T S_a u) = S_u U - d_a(...)
  for (std::size_t k = 0; k < e.size(); ++k) e[k] += s[k] - da[k];
  return e;
}

}  // namespace

Field euclidean_gradient(const NSProblem& p, std::span<const double> u) {
  const Residual r = residual(p, u);
  require(r.report, "ns residual");
  return euclidean_from(p, u, r.velocity);
}

Gradient gradient(const NSProblem& p, std::span<const double> u) {
  const Residual r = residual(p, u);
  require(r.report, "ns residual");
  const Field e = euclidean_from(p, u, r.velocity);
  SolveResult sol = projected_solve(p, e);
  return {std::move(sol.x), r.velocity, sol.report};
}

DescentResult descend(const NSProblem& p, Field u0, const DescentOptions& options) {
  if (u0.empty()) u0.assign(p.ops().size(), 0.0);
  check_velocity(p.ops(), u0, "ns::descend");
  u0 = leray_project(p.ops(), u0).velocity;
  DescentProblem problem;
  problem.energy = [&p](std::span<const double> u) { return energy(p, u); };
  problem.direction = [&p](std::span<const double> u, double) {
    const Field e = euclidean_gradient(p, u);
    SolveResult sol = projected_solve(p, e);
    require(sol.report, "ns gradient");
    Direction d;
    const double wk = dot(sol.x, e);
    d.grad_norm = std::sqrt(std::max(0.0, wk));
    d.direction = std::move(sol.x);
    scale(-1.0, d.direction);
    d.slope = -wk;
    d.inner_iterations = sol.report.iterations;
    return d;
  };
  DescentResult result = armijo_descent(problem, std::move(u0), options);
  result.x = leray_project(p.ops(), result.x).velocity;
  return result;
}

double force_dual_norm(const NSProblem& p) {
  const MacOps& ops = p.ops();
  Field load(p.force());
  scale(ops.h() * ops.h(), load);
  const SolveResult g = projected_solve(p, load);
  require(g.report, "force dual norm");
  return std::sqrt(std::max(0.0, ops.k_inner(g.x, g.x)));
}

double estimate_l4_embedding(const MacOps& ops, int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double h2 = ops.h() * ops.h();
  double worst = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const Field v = random_div_free(ops, rng);
    double q = 0.0;
    for (double x : v) q += h2 * x * x * x * x;
    const double grad = std::sqrt(ops.k_inner(v, v));
    if (grad > 0.0) worst = std::max(worst, std::pow(q, 0.25) / grad);
  }
  return worst;
}

SmallnessReport smallness_diagnostic(const NSProblem& p, std::span<const double> v,
                                     double embedding_c) {
  SmallnessReport r;
  r.nu = p.nu();
  r.force_norm = force_dual_norm(p);
  r.quotient = r.force_norm / (p.nu() * p.nu());
  r.sqrt_2e = std::sqrt(2.0 * energy(p, v));
  r.velocity_norm = std::sqrt(std::max(0.0, p.ops().k_inner(v, v)));
  r.embedding_c = embedding_c;
  r.prefactor = p.nu() - embedding_c * embedding_c / p.nu() * (r.force_norm + r.sqrt_2e);
  const double slack = 1e-9 * (1.0 + r.force_norm + r.sqrt_2e);
  r.inequality_holds = p.nu() * r.velocity_norm <= r.force_norm + r.sqrt_2e + slack;
  r.small_data = r.prefactor > 0.0;
  return r;
}

double skew_symmetry_check(const MacOps& ops, std::span<const double> u,
                           std::span<const double> v) {
  const double first = ops.trilinear(v, u, v) + ops.trilinear(v, v, u);
  const double second = ops.trilinear(v, u, u);
  return std::max(std::abs(first), std::abs(second));
}

double naive_symmetry_check(const MacOps& ops, std::span<const double> u,
                            std::span<const double> v) {
  const double first = ops.trilinear_naive(v, u, v) + ops.trilinear_naive(v, v, u);
  const double second = ops.trilinear_naive(v, u, u);
  return std::max(std::abs(first), std::abs(second));
}

Field random_div_free(const MacOps& ops, std::mt19937_64& rng, double amplitude) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double coef[3][3];
  for (auto& row : coef) {
    for (double& c : row) c = amplitude * normal(rng);
  }
  return ops.curl([&](double x, double y) {
    double s = 0.0;
    for (int m = 1; m <= 3; ++m) {
      for (int k = 1; k <= 3; ++k) {
        s += coef[m - 1][k - 1] * std::sin(m * kPi * x) * std::sin(k * kPi * y) / (m * k * kPi);
      }
    }
    return s;
  });
}

}  // namespace varerr::ns
