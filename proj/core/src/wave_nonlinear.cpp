#include "varerr/wave_nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace varerr::wave {

namespace {

struct Composite {
  Field value;  // f at every node
  Field f_ux, f_ut, f_u;
};

Composite compose(const NLWaveProblem& p, std::span<const double> u, bool partials) {
  const SpaceTimeOps& ops = p.ops();
  Field ux(ops.size()), ut(ops.size());
  ops.dx(u, ux);
  ops.dt(u, ut);
  Composite c;
  c.value.resize(ops.size());
  if (partials) {
    c.f_ux.resize(ops.size());
    c.f_ut.resize(ops.size());
    c.f_u.resize(ops.size());
  }
  for (int it = 0; it < ops.nt(); ++it) {
    for (int ix = 0; ix < ops.nx(); ++ix) {
      const std::size_t k = ops.grid().index(it, ix);
      const NlValue v = p.nonlinearity().eval({ux[k], ut[k], u[k], ops.t(it), ops.x(ix)});
      if (!std::isfinite(v.f)) {
        throw SolverFailure("nonlinearity evaluated to a non-finite value at node (" +
                            std::to_string(it) + ", " + std::to_string(ix) + ")");
      }
      c.value[k] = v.f;
      if (partials) {
        c.f_ux[k] = v.f_ux;
        c.f_ut[k] = v.f_ut;
        c.f_u[k] = v.f_u;
      }
    }
  }
  return c;
}

// -((S_t - S_x) u + M f(u)) on test rows.
Field residual_data(const NLWaveProblem& p, std::span<const double> u, const Composite& c) {
  const SpaceTimeOps& ops = p.ops();
  Field r(ops.size());
  ops.apply_wave(u, r);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = -(r[k] + ops.weights()[k] * c.value[k]);
  ops.restrict(FieldClass::kTest, r);
  return r;
}

// J dv = (S_t - S_x) dv + M (f_ux dv_x + f_ut dv_t + f_u dv) on test rows.
void jacobian_apply(const NLWaveProblem& p, const Composite& c, std::span<const double> dv,
                    std::span<double> out) {
  const SpaceTimeOps& ops = p.ops();
  Field dx(ops.size()), dt(ops.size());
  ops.dx(dv, dx);
  ops.dt(dv, dt);
  ops.apply_wave(dv, out);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] += ops.weights()[k] * (c.f_ux[k] * dx[k] + c.f_ut[k] * dt[k] + c.f_u[k] * dv[k]);
  }
  ops.restrict(FieldClass::kTest, out);
}

// J^T w on trial nodes.
void jacobian_transpose_apply(const NLWaveProblem& p, const Composite& c, std::span<const double> w,
                              std::span<double> out) {
  const SpaceTimeOps& ops = p.ops();
  const std::size_t n = ops.size();
  Field ax(n), at(n), tx(n), tt(n);
  for (std::size_t k = 0; k < n; ++k) {
    ax[k] = ops.weights()[k] * c.f_ux[k] * w[k];
    at[k] = ops.weights()[k] * c.f_ut[k] * w[k];
  }
  ops.dx_transpose(ax, tx);
  ops.dt_transpose(at, tt);
  ops.apply_wave(w, out);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] += tx[k] + tt[k] + ops.weights()[k] * c.f_u[k] * w[k];
  }
  ops.restrict(FieldClass::kTrial, out);
}

WaveNonlinearity with_source(WaveNonlinearity base, Source g) {
  if (!g) return base;
  auto inner = base.eval;
  base.eval = [inner, g](const NlArgs& a) {
    NlValue v = inner(a);
    v.f += g(a.t, a.x);
    return v;
  };
  return base;
}

}  // namespace

WaveNonlinearity sine_ut_nonlinearity(double alpha, Source g) {
  WaveNonlinearity n;
  n.name = "u+alpha*sin(u_t)";
  n.lipschitz = std::abs(alpha);
  n.fu_lower = 1.0;
  n.eval = [alpha](const NlArgs& a) {
    return NlValue{a.u + alpha * std::sin(a.ut), 0.0, alpha * std::cos(a.ut), 1.0};
  };
  return with_source(std::move(n), std::move(g));
}

WaveNonlinearity arctan_nonlinearity(double alpha, Source g) {
  WaveNonlinearity n;
  n.name = "u+alpha*arctan(u)";
  n.lipschitz = std::abs(alpha);
  n.fu_lower = std::min(1.0, 1.0 + alpha);
  n.eval = [alpha](const NlArgs& a) {
    return NlValue{a.u + alpha * std::atan(a.u), 0.0, 0.0, 1.0 + alpha / (1.0 + a.u * a.u)};
  };
  return with_source(std::move(n), std::move(g));
}

WaveNonlinearity linear_nonlinearity(Source g) {
  WaveNonlinearity n;
  n.name = "u+g";
  n.lipschitz = 0.0;
  n.fu_lower = 1.0;
  n.eval = [](const NlArgs& a) { return NlValue{a.u, 0.0, 0.0, 1.0}; };
  if (!g) return n;
  // Add the source before anything else so f = u + g rounds exactly like the
  // linear module's u + f.
  n.eval = [g](const NlArgs& a) { return NlValue{a.u + g(a.t, a.x), 0.0, 0.0, 1.0}; };
  return n;
}

WaveNonlinearity manufactured_arctan(double alpha, double amplitude, int k, double length) {
  const double w = k * std::numbers::pi / length;
  auto exact = [=](double t, double x) { return amplitude * t * t * std::sin(w * x); };
  // u*_tt - u*_xx - u* - alpha arctan(u*) = g
  Source g = [=](double t, double x) {
    const double s = std::sin(w * x);
    const double us = amplitude * t * t * s;
    return amplitude * (2.0 + t * t * w * w - t * t) * s - alpha * std::atan(us);
  };
  WaveNonlinearity n = arctan_nonlinearity(alpha, g);
  n.name = "manufactured-arctan";
  n.exact = exact;
  return n;
}

NLWaveProblem::NLWaveProblem(const GridSpec& grid, WaveNonlinearity nonlinearity)
    : ops_(grid), f_(std::move(nonlinearity)) {
  if (!f_.eval) throw std::invalid_argument("nonlinear wave problem needs a nonlinearity");
}

Field residual(const NLWaveProblem& p, std::span<const double> u) {
  p.ops().check(FieldClass::kTrial, u, "nlwave::residual");
  const Composite c = compose(p, u, false);
  const Field r = residual_data(p, u, c);
  return gram_solve(p.ops(), FieldClass::kTest, r, "nlwave::residual");
}

double energy(const NLWaveProblem& p, std::span<const double> u) {
  const Field big_u = residual(p, u);
  return 0.5 * p.ops().h1(big_u, big_u);
}

Field euclidean_gradient(const NLWaveProblem& p, std::span<const double> u) {
  p.ops().check(FieldClass::kTrial, u, "nlwave::gradient");
  const Composite c = compose(p, u, true);
  const Field r = residual_data(p, u, c);
  const Field big_u = gram_solve(p.ops(), FieldClass::kTest, r, "nlwave::residual");
  Field e(p.ops().size());
  jacobian_transpose_apply(p, c, big_u, e);
  scale(-1.0, e);
  return e;
}

Field gradient(const NLWaveProblem& p, std::span<const double> u) {
  const Field e = euclidean_gradient(p, u);
  return gram_solve(p.ops(), FieldClass::kTrial, e, "nlwave::gradient");
}

Field newton_direction(const NLWaveProblem& p, std::span<const double> u) {
  const SpaceTimeOps& ops = p.ops();
  ops.check(FieldClass::kTrial, u, "nlwave::newton_direction");
  const Composite c = compose(p, u, true);
  const Field rhs = residual_data(p, u, c);
  Field v(ops.size(), 0.0), jv(ops.size());
  const double ht = ops.ht();
  for (int n = 0; n + 1 < ops.nt(); ++n) {
    jacobian_apply(p, c, v, jv);
    for (int ix = 1; ix + 1 < ops.nx(); ++ix) {
      const std::size_t k = ops.grid().index(n, ix);
      // Coefficient of V(n+1, ix) in test row n: time stiffness plus the
      // forward part of the nodal time difference.
      const double dtc = n == 0 ? 1.0 / ht : 0.5 / ht;
      const double coef = -ops.hx() / ht + ops.weights()[k] * c.f_ut[k] * dtc;
      if (!(std::abs(coef) > 1e-12 * ops.hx() / ht)) {
        throw SolverFailure("linearized wave march: vanishing coefficient at row " +
                            std::to_string(n));
      }
      v[ops.grid().index(n + 1, ix)] = (rhs[k] - jv[k]) / coef;
    }
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw SolverFailure("linearized wave march produced non-finite values");
  }
  return v;
}

DescentResult descend(const NLWaveProblem& p, Field u0, Policy policy,
                      const DescentOptions& options) {
  if (u0.empty()) u0.assign(p.ops().size(), 0.0);
  p.ops().check(FieldClass::kTrial, u0, "nlwave::descend");
  DescentProblem problem;
  problem.energy = [&p](std::span<const double> u) { return energy(p, u); };
  problem.direction = [&p, policy](std::span<const double> u, double) {
    Direction d;
    const Field e = euclidean_gradient(p, u);
    const Field g = gram_solve(p.ops(), FieldClass::kTrial, e, "nlwave::gradient");
    d.grad_norm = std::sqrt(std::max(0.0, dot(g, e)));
    if (policy == Policy::kNewton) {
      d.direction = newton_direction(p, u);
      d.slope = dot(e, d.direction);
    } else {
      d.direction = g;
      scale(-1.0, d.direction);
      d.slope = -dot(g, e);
    }
    return d;
  };
  return armijo_descent(problem, std::move(u0), options);
}

HypothesisReport check_hypotheses(const NLWaveProblem& p, double lo, double hi, int n_samples,
                                  std::uint64_t seed) {
  if (n_samples < 100) throw std::invalid_argument("check_hypotheses: need >= 100 samples");
  if (!(hi > lo)) throw std::invalid_argument("check_hypotheses: empty box");
  const SpaceTimeOps& ops = p.ops();
  HypothesisReport r;
  r.embedding_d = estimate_sup_embedding(ops, 32, seed ^ 0x9e3779b97f4a7c15ULL);
  const double d = r.embedding_d > 0.0 ? r.embedding_d : 1.0;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(lo, hi), unit(0.0, 1.0);
  const double t_end = ops.grid().axis(0).extent, len = ops.grid().axis(1).extent;
  const auto& f = p.nonlinearity().eval;
  r.min_abs_fu = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    NlArgs a{box(rng), box(rng), box(rng), t_end * unit(rng), len * unit(rng)};
    NlArgs b = a;
    switch (s % 4) {
      case 0:
        b.ux = box(rng);
        break;
      case 1:
        b.ut = box(rng);
        break;
      case 2:
        b.u = box(rng);
        break;
      default:
        b.ux = box(rng);
        b.ut = box(rng);
        b.u = box(rng);
        break;
    }
    const NlValue fa = f(a), fb = f(b);
    r.min_abs_fu = std::min(r.min_abs_fu, std::abs(fa.f_u));
    const double denom = std::abs(a.ux - b.ux) + std::abs(a.ut - b.ut) + std::abs(a.u - b.u) / d;
    if (denom > 0.0) {
      const double q = std::abs((fa.f - a.u) - (fb.f - b.u)) / denom;
      r.lipschitz_quotient = std::max(r.lipschitz_quotient, q);
    }
  }
  const Field f0 = sample(ops, [&](double t, double x) { return f({0.0, 0.0, 0.0, t, x}).f; });
  r.f0_l2 = std::sqrt(ops.l2(f0, f0));
  r.lipschitz_ok = r.lipschitz_quotient < 1.0;
  r.fu_ok = r.min_abs_fu >= std::max(p.nonlinearity().fu_lower, 0.0) && r.min_abs_fu > 0.0;
  return r;
}

}  // namespace varerr::wave
