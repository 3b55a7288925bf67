#include "varerr/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace varerr {

namespace {

double end_weight(int i, int n, double h) { return (i == 0 || i == n - 1) ? 0.5 * h : h; }

void check_size(const GridSpec& grid, std::span<const double> u, int components, const char* what) {
  if (components < 1) throw std::invalid_argument("components must be >= 1");
  if (u.size() != grid.size() * static_cast<std::size_t>(components)) {
    throw ShapeError(std::string(what) + ": field has " + std::to_string(u.size()) +
                     " values, grid expects " +
                     std::to_string(grid.size() * static_cast<std::size_t>(components)));
  }
}

// Calls visit(p, q, weight) for every grid edge, weight = transverse trapezoid / h.
template <typename Visit>
void for_each_edge(const GridSpec& grid, Visit&& visit) {
  if (grid.dims() == 1) {
    const int n = grid.n(0);
    const double c = 1.0 / grid.spacing(0);
    for (int i = 0; i + 1 < n; ++i) visit(std::size_t(i), std::size_t(i + 1), c);
    return;
  }
  const int n0 = grid.n(0);
  const int n1 = grid.n(1);
  const double h0 = grid.spacing(0);
  const double h1 = grid.spacing(1);
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      if (i + 1 < n0) visit(grid.index(i, j), grid.index(i + 1, j), end_weight(j, n1, h1) / h0);
      if (j + 1 < n1) visit(grid.index(i, j), grid.index(i, j + 1), end_weight(i, n0, h0) / h1);
    }
  }
}

}  // namespace

GridSpec::GridSpec(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty() || axes_.size() > 2) {
    throw std::invalid_argument("GridSpec supports one or two axes");
  }
  for (const auto& a : axes_) {
    if (a.n_nodes < 3) throw std::invalid_argument("GridSpec: need at least 3 nodes per axis");
    if (!(a.extent > 0.0) || !std::isfinite(a.extent)) {
      throw std::invalid_argument("GridSpec: extents must be positive and finite");
    }
  }
}

GridSpec GridSpec::line(int n_nodes, double extent, AxisRole role) {
  return GridSpec({Axis{n_nodes, extent, role}});
}

GridSpec GridSpec::rect(Axis slow, Axis fast) { return GridSpec({slow, fast}); }

std::size_t GridSpec::size() const {
  std::size_t s = 1;
  for (const auto& a : axes_) s *= static_cast<std::size_t>(a.n_nodes);
  return s;
}

Field trapezoid_weights(const GridSpec& grid) {
  Field w(grid.size());
  if (grid.dims() == 1) {
    for (int i = 0; i < grid.n(0); ++i)
      w[std::size_t(i)] = end_weight(i, grid.n(0), grid.spacing(0));
    return w;
  }
  for (int i = 0; i < grid.n(0); ++i) {
    for (int j = 0; j < grid.n(1); ++j) {
      w[grid.index(i, j)] =
          end_weight(i, grid.n(0), grid.spacing(0)) * end_weight(j, grid.n(1), grid.spacing(1));
    }
  }
  return w;
}

double inner(InnerProductKind kind, const GridSpec& grid, std::span<const double> u,
             std::span<const double> v, int components) {
  check_size(grid, u, components, "inner(u)");
  check_size(grid, v, components, "inner(v)");
  const auto nc = static_cast<std::size_t>(components);
  double sum = 0.0;
  if (kind == InnerProductKind::kL2 || kind == InnerProductKind::kH1Full) {
    const Field w = trapezoid_weights(grid);
    for (std::size_t p = 0; p < w.size(); ++p) {
      for (std::size_t c = 0; c < nc; ++c) sum += w[p] * (u[p * nc + c] * v[p * nc + c]);
    }
  }
  if (kind == InnerProductKind::kH1Semi || kind == InnerProductKind::kH1Full) {
    for_each_edge(grid, [&](std::size_t p, std::size_t q, double weight) {
      for (std::size_t c = 0; c < nc; ++c) {
        sum += weight * ((u[q * nc + c] - u[p * nc + c]) * (v[q * nc + c] - v[p * nc + c]));
      }
    });
  }
  return sum;
}

double norm(InnerProductKind kind, const GridSpec& grid, std::span<const double> u,
            int components) {
  return std::sqrt(std::max(0.0, inner(kind, grid, u, u, components)));
}

void gram_apply(InnerProductKind kind, const GridSpec& grid, std::span<const double> u,
                std::span<double> out, int components) {
  check_size(grid, u, components, "gram_apply(u)");
  if (out.size() != u.size()) throw ShapeError("gram_apply: output size mismatch");
  const auto nc = static_cast<std::size_t>(components);
  std::fill(out.begin(), out.end(), 0.0);
  if (kind == InnerProductKind::kL2 || kind == InnerProductKind::kH1Full) {
    const Field w = trapezoid_weights(grid);
    for (std::size_t p = 0; p < w.size(); ++p) {
      for (std::size_t c = 0; c < nc; ++c) out[p * nc + c] += w[p] * u[p * nc + c];
    }
  }
  if (kind == InnerProductKind::kH1Semi || kind == InnerProductKind::kH1Full) {
    for_each_edge(grid, [&](std::size_t p, std::size_t q, double weight) {
      for (std::size_t c = 0; c < nc; ++c) {
        const double d = weight * (u[q * nc + c] - u[p * nc + c]);
        out[q * nc + c] += d;
        out[p * nc + c] -= d;
      }
    });
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

Field lincomb(double a, std::span<const double> x, double b, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("lincomb: size mismatch");
  Field out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

SolveResult cg_solve(const LinearMap& apply_operator, std::span<const double> rhs, double tol,
                     int max_iter) {
  CgOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return cg_solve(apply_operator, rhs, options);
}

SolveResult cg_solve(const LinearMap& apply_operator, std::span<const double> rhs,
                     const CgOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("cg_solve: tol must be positive");
  if (options.max_iter < 0) throw std::invalid_argument("cg_solve: max_iter must be >= 0");
  const std::size_t n = rhs.size();
  SolveResult result;
  result.x.assign(n, 0.0);
  if (!options.initial_guess.empty()) {
    if (options.initial_guess.size() != n) throw ShapeError("cg_solve: initial guess size");
    std::copy(options.initial_guess.begin(), options.initial_guess.end(), result.x.begin());
  }
  Field& x = result.x;

  const double rhs_norm = norm2(rhs);
  const double bnorm = std::max(rhs_norm, options.reference_norm);
  Field r(n), ap(n), z(n), p(n);
  auto true_residual = [&]() {
    apply_operator(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
    return norm2(r);
  };

  if (rhs_norm == 0.0) {
    // The solution of an SPD system with zero data is zero.
    std::fill(x.begin(), x.end(), 0.0);
    result.report = {0, 0.0, true};
    return result;
  }

  double rnorm = true_residual();
  auto precondition = [&]() {
    if (options.preconditioner != nullptr) {
      (*options.preconditioner)(r, z);
    } else {
      std::copy(r.begin(), r.end(), z.begin());
    }
  };

  int it = 0;
  if (rnorm > options.tol * bnorm) {
    precondition();
    p = z;
    double rz = dot(r, z);
    while (it < options.max_iter) {
      ++it;
      apply_operator(p, ap);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) break;  // breakdown: operator not SPD on this Krylov space
      const double alpha = rz / pap;
      axpy(alpha, p, x);
      axpy(-alpha, ap, r);
      rnorm = norm2(r);
      bool replaced = false;
      if (rnorm <= options.tol * bnorm) {
        // Residual replacement guards against drift of the recursive residual.
        rnorm = true_residual();
        if (rnorm <= options.tol * bnorm) break;
        replaced = true;
      }
      precondition();
      const double rz_next = dot(r, z);
      if (options.monitor && options.monitor(it, x, rz_next)) break;
      if (replaced) {
        p = z;
        rz = rz_next;
        continue;
      }
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }
  const double final_rel = true_residual() / bnorm;
  result.report.iterations = it;
  result.report.relative_residual = final_rel;
  result.report.converged = final_rel <= options.tol;
  return result;
}

double fd_gradient_check(const EnergyFn& energy, const GradientFn& grad,
                         std::span<const double> point, const FdCheckOptions& options) {
  if (options.n_directions < 3) {
    throw std::invalid_argument("fd_gradient_check: need at least 3 directions");
  }
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw std::invalid_argument("fd_gradient_check: eps must lie in [1e-7, 1e-3]");
  }
  const Field g = grad(point);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = point.size();
  double worst = 0.0;
  Field d(n), plus(n), minus(n);
  for (int k = 0; k < options.n_directions; ++k) {
    for (double& v : d) v = normal(rng);
    if (options.constrain) options.constrain(d);
    const double len = norm2(d);
    if (len == 0.0) continue;
    scale(1.0 / len, d);
    for (std::size_t i = 0; i < n; ++i) {
      plus[i] = point[i] + options.eps * d[i];
      minus[i] = point[i] - options.eps * d[i];
    }
    const double fd = (energy(plus) - energy(minus)) / (2.0 * options.eps);
    const double analytic = options.pairing ? options.pairing(g, d) : dot(g, d);
    worst = std::max(worst, std::abs(analytic - fd) / (1.0 + std::abs(analytic)));
  }
  return worst;
}

}  // namespace varerr
