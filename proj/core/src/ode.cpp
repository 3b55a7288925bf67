#include "varerr/ode.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace varerr::ode {

namespace {

using Mat = std::vector<double>;

template <typename F, typename D>
OdeField componentwise(std::string name, int dim, double lipschitz, F f, D df) {
  if (dim < 1) throw std::invalid_argument("ODE dimension must be >= 1");
  OdeField out;
  out.name = std::move(name);
  out.dim = dim;
  out.lipschitz = lipschitz;
  out.value = [f](std::span<const double> y, std::span<double> r) {
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = f(y[i]);
  };
  out.jacobian = [df, dim](std::span<const double> y, std::span<double> j) {
    std::fill(j.begin(), j.end(), 0.0);
    for (int i = 0; i < dim; ++i) j[std::size_t(i * dim + i)] = df(y[std::size_t(i)]);
  };
  return out;
}

// Solves A x = b in place (A row-major n x n) by partial pivoting.
// Returns false when a pivot is negligible relative to the row scale.
bool lu_solve(Mat a, std::span<double> b, int n) {
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double scale = 0.0;
    for (int i = k; i < n; ++i) {
      if (std::abs(a[std::size_t(i * n + k)]) > std::abs(a[std::size_t(piv * n + k)])) piv = i;
    }
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a[std::size_t(piv * n + j)]));
    if (!(std::abs(a[std::size_t(piv * n + k)]) > 1e-14 * std::max(scale, 1e-300))) return false;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(a[std::size_t(k * n + j)], a[std::size_t(piv * n + j)]);
      std::swap(b[std::size_t(k)], b[std::size_t(piv)]);
    }
    for (int i = k + 1; i < n; ++i) {
      const double m = a[std::size_t(i * n + k)] / a[std::size_t(k * n + k)];
      for (int j = k; j < n; ++j) a[std::size_t(i * n + j)] -= m * a[std::size_t(k * n + j)];
      b[std::size_t(i)] -= m * b[std::size_t(k)];
    }
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[std::size_t(i)];
    for (int j = i + 1; j < n; ++j) s -= a[std::size_t(i * n + j)] * b[std::size_t(j)];
    b[std::size_t(i)] = s / a[std::size_t(i * n + i)];
  }
  return true;
}

void check_path(const OdeProblem& p, std::span<const double> z, const char* what) {
  if (z.size() != p.path_size()) {
    throw ShapeError(std::string(what) + ": path has " + std::to_string(z.size()) +
                     " values, problem expects " + std::to_string(p.path_size()));
  }
}

// Per-cell residual r_i = delta_i - f(m_i) and, optionally, J_i = grad f(m_i).
struct CellData {
  Field r;  // n_steps * dim
  Mat jac;  // n_steps * dim * dim (empty unless requested)
};

CellData cells(const OdeProblem& p, std::span<const double> z, bool with_jacobian) {
  const int n = p.dim();
  const int k = p.n_steps();
  const double h = p.step();
  CellData out;
  out.r.resize(std::size_t(k) * std::size_t(n));
  if (with_jacobian) out.jac.resize(std::size_t(k) * std::size_t(n * n));
  Field mid(static_cast<std::size_t>(n)), fval(static_cast<std::size_t>(n));
  for (int i = 0; i < k; ++i) {
    for (int c = 0; c < n; ++c) {
      mid[std::size_t(c)] = p.x0()[std::size_t(c)] +
                            0.5 * (z[std::size_t(i * n + c)] + z[std::size_t((i + 1) * n + c)]);
    }
    p.field().value(mid, fval);
    for (int c = 0; c < n; ++c) {
      const double delta = (z[std::size_t((i + 1) * n + c)] - z[std::size_t(i * n + c)]) / h;
      out.r[std::size_t(i * n + c)] = delta - fval[std::size_t(c)];
    }
    if (with_jacobian) {
      p.field().jacobian(mid, std::span<double>(out.jac).subspan(
                                  std::size_t(i) * std::size_t(n * n), std::size_t(n * n)));
    }
  }
  return out;
}

double spectral_norm(const Mat& j, int n) {
  if (n == 1) return std::abs(j[0]);
  // Power iteration on J^T J from a fixed start.
  Field v(std::size_t(n), 1.0 / std::sqrt(double(n))), w(static_cast<std::size_t>(n)),
      u(static_cast<std::size_t>(n));
  double sigma = 0.0;
  for (int it = 0; it < 200; ++it) {
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      for (int c = 0; c < n; ++c) s += j[std::size_t(r * n + c)] * v[std::size_t(c)];
      w[std::size_t(r)] = s;
    }
    for (int c = 0; c < n; ++c) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += j[std::size_t(r * n + c)] * w[std::size_t(r)];
      u[std::size_t(c)] = s;
    }
    const double len = norm2(u);
    if (len == 0.0) return 0.0;
    const double next = std::sqrt(len);
    for (int c = 0; c < n; ++c) v[std::size_t(c)] = u[std::size_t(c)] / len;
    if (std::abs(next - sigma) <= 1e-14 * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

}  // namespace

OdeField linear_field(double a, int dim) {
  return componentwise(
      "linear", dim, std::abs(a), [a](double x) { return a * x; }, [a](double) { return a; });
}

OdeField sine_field(double a, int dim) {
  return componentwise(
      "sine", dim, std::abs(a), [a](double x) { return a * std::sin(x); },
      [a](double x) { return a * std::cos(x); });
}

OdeField arctan_field(double a, int dim) {
  return componentwise(
      "arctan", dim, std::abs(a), [a](double x) { return a * std::atan(x); },
      [a](double x) { return a / (1.0 + x * x); });
}

OdeField logistic_field(double a, int dim) {
  return componentwise(
      "logistic", dim, std::abs(a), [a](double x) { return a * x * (1.0 - x); },
      [a](double x) { return a * (1.0 - 2.0 * x); });
}

OdeField make_field(const std::string& name, double coefficient, int dim) {
  if (name == "linear") return linear_field(coefficient, dim);
  if (name == "sine") return sine_field(coefficient, dim);
  if (name == "arctan") return arctan_field(coefficient, dim);
  if (name == "logistic") return logistic_field(coefficient, dim);
  throw std::invalid_argument("unknown ODE field '" + name +
                              "' (expected linear|sine|arctan|logistic)");
}

OdeProblem::OdeProblem(OdeField field, Field x0, double horizon, int n_steps)
    : field_(std::move(field)), x0_(std::move(x0)), horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
    throw std::invalid_argument("ODE horizon T must be positive");
  }
  if (n_steps_ < 2) throw std::invalid_argument("ODE grid needs K >= 2 steps");
  if (x0_.size() != std::size_t(field_.dim)) {
    throw ShapeError("x0 has " + std::to_string(x0_.size()) + " components, field has " +
                     std::to_string(field_.dim));
  }
  if (!field_.value || !field_.jacobian) throw std::invalid_argument("ODE field incomplete");
}

Field zero_path(const OdeProblem& p) { return Field(p.path_size(), 0.0); }

double energy(const OdeProblem& p, std::span<const double> z) {
  check_path(p, z, "ode::energy");
  const CellData c = cells(p, z, false);
  return 0.5 * p.step() * dot(c.r, c.r);
}

Field euclidean_gradient(const OdeProblem& p, std::span<const double> z) {
  check_path(p, z, "ode::euclidean_gradient");
  const int n = p.dim();
  const int k = p.n_steps();
  const double h = p.step();
  const CellData c = cells(p, z, true);
  Field e(p.path_size(), 0.0);
  Field jtr(static_cast<std::size_t>(n));
  for (int i = 0; i < k; ++i) {
    const double* r = &c.r[std::size_t(i * n)];
    const double* j = &c.jac[std::size_t(i) * std::size_t(n * n)];
    for (int col = 0; col < n; ++col) {
      double s = 0.0;
      for (int row = 0; row < n; ++row) s += j[row * n + col] * r[row];
      jtr[std::size_t(col)] = s;
    }
    for (int d = 0; d < n; ++d) {
      e[std::size_t((i + 1) * n + d)] += r[d] - 0.5 * h * jtr[std::size_t(d)];
      e[std::size_t(i * n + d)] += -r[d] - 0.5 * h * jtr[std::size_t(d)];
    }
  }
  for (int d = 0; d < n; ++d) e[std::size_t(d)] = 0.0;  // z(0) = 0 is fixed
  return e;
}

Field residual_gradient(const OdeProblem& p, std::span<const double> z) {
  const Field e = euclidean_gradient(p, z);
  const int n = p.dim();
  const int k = p.n_steps();
  const double h = p.step();
  // With v_m = h sum_{i<m} v'_i the functional reads sum_i h v'_i sum_{m>i} e_m,
  // so g'_i is the suffix sum of e.
  Field g(p.path_size(), 0.0);
  Field suffix(std::size_t(n), 0.0);
  Field slope(std::size_t(k) * std::size_t(n));
  for (int i = k - 1; i >= 0; --i) {
    for (int d = 0; d < n; ++d) {
      suffix[std::size_t(d)] += e[std::size_t((i + 1) * n + d)];
      slope[std::size_t(i * n + d)] = suffix[std::size_t(d)];
    }
  }
  for (int i = 0; i < k; ++i) {
    for (int d = 0; d < n; ++d) {
      g[std::size_t((i + 1) * n + d)] =
          g[std::size_t(i * n + d)] + h * slope[std::size_t(i * n + d)];
    }
  }
  return g;
}

double h_inner(const OdeProblem& p, std::span<const double> g, std::span<const double> v) {
  check_path(p, g, "ode::h_inner");
  check_path(p, v, "ode::h_inner");
  const int n = p.dim();
  const double h = p.step();
  double s = 0.0;
  for (int i = 0; i < p.n_steps(); ++i) {
    for (int d = 0; d < n; ++d) {
      const double a = g[std::size_t((i + 1) * n + d)] - g[std::size_t(i * n + d)];
      const double b = v[std::size_t((i + 1) * n + d)] - v[std::size_t(i * n + d)];
      s += a * b / h;
    }
  }
  return s;
}

Field newton_direction(const OdeProblem& p, std::span<const double> z) {
  check_path(p, z, "ode::newton_direction");
  const int n = p.dim();
  const double h = p.step();
  const CellData c = cells(p, z, true);
  Field zdir(p.path_size(), 0.0);
  Mat a(static_cast<std::size_t>(n * n));
  Field b(static_cast<std::size_t>(n));
  for (int i = 0; i < p.n_steps(); ++i) {
    // (I - h/2 J) Z_{i+1} = (I + h/2 J) Z_i - h r_i
    const double* j = &c.jac[std::size_t(i) * std::size_t(n * n)];
    for (int row = 0; row < n; ++row) {
      double s = zdir[std::size_t(i * n + row)] - h * c.r[std::size_t(i * n + row)];
      for (int col = 0; col < n; ++col) {
        const double jv = j[row * n + col];
        s += 0.5 * h * jv * zdir[std::size_t(i * n + col)];
        a[std::size_t(row * n + col)] = (row == col ? 1.0 : 0.0) - 0.5 * h * jv;
      }
      b[std::size_t(row)] = s;
    }
    if (!lu_solve(a, b, n)) {
      throw SingularStep("implicit midpoint step matrix singular at t = " +
                         std::to_string(p.time(i)) + "; reduce the step size");
    }
    for (int d = 0; d < n; ++d) zdir[std::size_t((i + 1) * n + d)] = b[std::size_t(d)];
  }
  return zdir;
}

double pairing_check(const OdeProblem& p, std::span<const double> z) {
  const double e = energy(p, z);
  const Field zdir = newton_direction(p, z);
  const double pairing = dot(euclidean_gradient(p, z), zdir);
  return std::abs(pairing + 2.0 * e) / (1.0 + 2.0 * e);
}

DescentResult descend(const OdeProblem& p, Field z0, Policy policy, const DescentOptions& options) {
  check_path(p, z0, "ode::descend");
  DescentProblem problem;
  problem.energy = [&p](std::span<const double> z) { return energy(p, z); };
  problem.direction = [&p, policy](std::span<const double> z, double) {
    Direction d;
    const Field e = euclidean_gradient(p, z);
    const Field g = residual_gradient(p, z);
    d.grad_norm = std::sqrt(std::max(0.0, h_inner(p, g, g)));
    if (policy == Policy::kNewton) {
      d.direction = newton_direction(p, z);
      d.slope = dot(e, d.direction);
    } else {
      d.direction = g;
      scale(-1.0, d.direction);
      d.slope = -d.grad_norm * d.grad_norm;
    }
    return d;
  };
  return armijo_descent(problem, std::move(z0), options);
}

Field midpoint_solution(const OdeProblem& p) {
  const int n = p.dim();
  const double h = p.step();
  Field x(p.path_size());
  Field y(static_cast<std::size_t>(n)), next(static_cast<std::size_t>(n)),
      mid(static_cast<std::size_t>(n)), f(static_cast<std::size_t>(n));
  Mat jac(static_cast<std::size_t>(n * n)), a(static_cast<std::size_t>(n * n));
  Field rhs(static_cast<std::size_t>(n));
  std::copy(p.x0().begin(), p.x0().end(), y.begin());
  for (int i = 0; i < p.n_steps(); ++i) {
    next = y;
    // Newton on G(next) = next - y - h f((y+next)/2).
    for (int it = 0; it < 50; ++it) {
      for (int d = 0; d < n; ++d)
        mid[std::size_t(d)] = 0.5 * (y[std::size_t(d)] + next[std::size_t(d)]);
      p.field().value(mid, f);
      p.field().jacobian(mid, jac);
      double gnorm = 0.0;
      for (int row = 0; row < n; ++row) {
        rhs[std::size_t(row)] =
            -(next[std::size_t(row)] - y[std::size_t(row)] - h * f[std::size_t(row)]);
        gnorm = std::max(gnorm, std::abs(rhs[std::size_t(row)]));
        for (int col = 0; col < n; ++col) {
          a[std::size_t(row * n + col)] =
              (row == col ? 1.0 : 0.0) - 0.5 * h * jac[std::size_t(row * n + col)];
        }
      }
      if (gnorm <= 1e-16 * (1.0 + norm2(next))) break;
      if (!lu_solve(a, rhs, n)) throw SingularStep("midpoint_solution: singular step matrix");
      for (int d = 0; d < n; ++d) next[std::size_t(d)] += rhs[std::size_t(d)];
    }
    for (int d = 0; d < n; ++d) {
      x[std::size_t((i + 1) * n + d)] = next[std::size_t(d)] - p.x0()[std::size_t(d)];
    }
    y = next;
  }
  for (int d = 0; d < n; ++d) x[std::size_t(d)] = 0.0;
  return x;
}

LipschitzReport check_lipschitz(const OdeField& field, double lo, double hi, int n_samples,
                                std::uint64_t seed) {
  if (n_samples < 100) throw std::invalid_argument("check_lipschitz: need >= 100 samples");
  if (!(hi > lo)) throw std::invalid_argument("check_lipschitz: empty box");
  const int n = field.dim;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  Field y(static_cast<std::size_t>(n));
  Mat j(static_cast<std::size_t>(n * n));
  LipschitzReport report;
  report.declared = field.lipschitz;
  for (int s = 0; s < n_samples; ++s) {
    for (double& v : y) v = (s == 0) ? 0.5 * (lo + hi) : uni(rng);
    field.jacobian(y, j);
    report.max_norm = std::max(report.max_norm, spectral_norm(j, n));
  }
  report.exceeds_declared = report.max_norm > field.lipschitz * (1.0 + 1e-12);
  return report;
}

Field random_path(const OdeProblem& p, std::mt19937_64& rng, double amplitude) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = p.dim();
  const double t_end = p.horizon();
  Field z(p.path_size(), 0.0);
  for (int d = 0; d < n; ++d) {
    for (int m = 1; m <= 4; ++m) {
      const double c = amplitude * normal(rng) / m;
      const double w = (m - 0.5) * std::numbers::pi / t_end;
      for (int i = 0; i <= p.n_steps(); ++i) {
        z[std::size_t(i * n + d)] += c * std::sin(w * p.time(i));
      }
    }
  }
  return z;
}

double max_sq_distance(const OdeProblem& p, std::span<const double> y, std::span<const double> z) {
  check_path(p, y, "ode::max_sq_distance");
  check_path(p, z, "ode::max_sq_distance");
  const int n = p.dim();
  double worst = 0.0;
  for (int i = 0; i <= p.n_steps(); ++i) {
    double s = 0.0;
    for (int d = 0; d < n; ++d) {
      const double diff = y[std::size_t(i * n + d)] - z[std::size_t(i * n + d)];
      s += diff * diff;
    }
    worst = std::max(worst, s);
  }
  return worst;
}

}  // namespace varerr::ode
