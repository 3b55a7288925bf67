#include "varerr/wave_linear.hpp"

#include <cmath>
#include <numbers>

namespace varerr::wave {

namespace {

constexpr double kPi = std::numbers::pi;

// L v = (S_t - S_x + M) v restricted to test rows.
void apply_l(const WaveProblem& p, std::span<const double> v, std::span<double> out) {
  const SpaceTimeOps& ops = p.ops();
  ops.apply_wave(v, out);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += ops.weights()[k] * v[k];
  ops.restrict(FieldClass::kTest, out);
}

// L^T w for test-class w, restricted to trial nodes.
void apply_lt(const WaveProblem& p, std::span<const double> w, std::span<double> out) {
  const SpaceTimeOps& ops = p.ops();
  ops.apply_wave(w, out);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += ops.weights()[k] * w[k];
  ops.restrict(FieldClass::kTrial, out);
}

// -(L u + M f) on test rows.
Field residual_data(const WaveProblem& p, std::span<const double> u) {
  const SpaceTimeOps& ops = p.ops();
  Field r(ops.size());
  ops.apply_wave(u, r);
  for (std::size_t k = 0; k < r.size(); ++k) {
    r[k] = -(r[k] + ops.weights()[k] * (u[k] + p.forcing_nodal()[k]));
  }
  ops.restrict(FieldClass::kTest, r);
  return r;
}

}  // namespace

Forcing zero_forcing() {
  return {"zero", [](double, double) { return 0.0; }, [](double, double) { return 0.0; }};
}

Forcing manufactured_forcing(double amplitude, int k, double length) {
  const double w = k * kPi / length;
  Forcing f;
  f.name = "manufactured";
  f.exact = [=](double t, double x) { return amplitude * t * t * std::sin(w * x); };
  f.f = [=](double t, double x) {
    return amplitude * (2.0 + t * t * w * w - t * t) * std::sin(w * x);
  };
  return f;
}

Forcing separable_forcing(double amplitude, int k, double length) {
  const double w = k * kPi / length;
  return {"separable", [=](double t, double x) { return amplitude * t * std::sin(w * x); }, {}};
}

Forcing bump_forcing(double amplitude, double t0, double x0, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("bump radius must be positive");
  return {"bump",
          [=](double t, double x) {
            const double r2 = ((t - t0) * (t - t0) + (x - x0) * (x - x0)) / (radius * radius);
            return r2 < 1.0 ? amplitude * std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
          },
          {}};
}

WaveProblem::WaveProblem(const GridSpec& grid, Forcing forcing, WaveSettings settings)
    : ops_(grid), forcing_(std::move(forcing)), settings_(settings) {
  if (!forcing_.f) throw std::invalid_argument("wave problem needs a forcing");
  f_ = sample(ops_, forcing_.f);
  for (double v : f_) {
    if (!std::isfinite(v)) throw std::invalid_argument("wave forcing must be finite");
  }
}

Field residual(const WaveProblem& p, std::span<const double> u) {
  p.ops().check(FieldClass::kTrial, u, "wave::residual");
  const Field r = residual_data(p, u);
  return gram_solve(p.ops(), FieldClass::kTest, r, "wave::residual");
}

double energy(const WaveProblem& p, std::span<const double> u) {
  const Field big_u = residual(p, u);
  return 0.5 * p.ops().h1(big_u, big_u);
}

Field euclidean_gradient(const WaveProblem& p, std::span<const double> u) {
  const Field big_u = residual(p, u);
  Field e(p.ops().size());
  apply_lt(p, big_u, e);
  scale(-1.0, e);
  return e;
}

Field gradient(const WaveProblem& p, std::span<const double> u) {
  const Field e = euclidean_gradient(p, u);
  return gram_solve(p.ops(), FieldClass::kTrial, e, "wave::gradient");
}

DescentResult solve(const WaveProblem& p, Field u0, const DescentOptions& options) {
  validate(options);
  const SpaceTimeOps& ops = p.ops();
  if (u0.empty()) u0.assign(ops.size(), 0.0);
  ops.check(FieldClass::kTrial, u0, "wave::solve");

  DescentResult result;
  DescentTrace& trace = result.trace;
  try {
    // N u = b with N = L^T B^-1 L and b = -L^T B^-1 M f.
    Field tmp(ops.size()), tmp2(ops.size());
    const LinearMap normal = [&](std::span<const double> x, std::span<double> y) {
      apply_l(p, x, tmp);
      const Field s = gram_solve(ops, FieldClass::kTest, tmp, "wave::solve");
      apply_lt(p, s, y);
    };
    const LinearMap precondition = [&](std::span<const double> r, std::span<double> z) {
      const Field s = gram_solve(ops, FieldClass::kTrial, r, "wave::solve");
      std::copy(s.begin(), s.end(), z.begin());
    };
    Field mf(ops.size());
    for (std::size_t k = 0; k < mf.size(); ++k) mf[k] = ops.weights()[k] * p.forcing_nodal()[k];
    ops.restrict(FieldClass::kTest, mf);
    const Field s = gram_solve(ops, FieldClass::kTest, mf, "wave::solve");
    Field b(ops.size());
    apply_lt(p, s, b);
    scale(-1.0, b);

    const double e0 = energy(p, u0);
    const Field g0 = gradient(p, u0);
    trace.entries.push_back({0, e0, std::sqrt(std::max(0.0, ops.h1(g0, g0))), 0.0, 0});
    if (e0 <= options.tol_E) {
      result.x = std::move(u0);
      trace.termination = Termination::kConverged;
      return result;
    }

    bool reached = false;
    CgOptions cg;
    cg.tol = p.settings().cg_tol;
    cg.max_iter = options.max_iter;
    cg.preconditioner = &precondition;
    cg.initial_guess = u0;
    // CG updates carry no line-search step; step = 1 marks a full update.
    cg.monitor = [&](int it, std::span<const double> x, double rz) {
      const double e = energy(p, x);
      trace.entries.push_back({it, e, std::sqrt(std::max(0.0, rz)), 1.0, 1});
      reached = e <= options.tol_E;
      return reached;
    };
    SolveResult sol = cg_solve(normal, b, cg);
    ops.restrict(FieldClass::kTrial, sol.x);
    result.x = std::move(sol.x);
    if (reached) {
      trace.termination = Termination::kConverged;
    } else {
      // Stopped on the CG residual or iteration cap: judge by the energy.
      const double e = energy(p, result.x);
      if (trace.entries.back().energy != e) {
        const Field g = gradient(p, result.x);
        trace.entries.push_back(
            {trace.iterations() + 1, e, std::sqrt(std::max(0.0, ops.h1(g, g))), 1.0, 1});
      }
      trace.termination = e <= options.tol_E ? Termination::kConverged
                          : sol.report.iterations >= options.max_iter
                              ? Termination::kMaxIterations
                              : Termination::kLineSearchFailed;
      if (trace.termination == Termination::kLineSearchFailed) {
        trace.message = "CG stagnated above tol_E";
      }
    }
  } catch (const SolverFailure& e) {
    trace.termination = Termination::kSolverFailed;
    trace.message = e.what();
    if (result.x.empty()) result.x = std::move(u0);
  }
  return result;
}

}  // namespace varerr::wave
