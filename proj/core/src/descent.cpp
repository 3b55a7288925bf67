#include "varerr/descent.hpp"

#include <cmath>
#include <limits>

namespace varerr {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kConverged:
      return "converged";
    case Termination::kMaxIterations:
      return "max_iterations";
    case Termination::kLineSearchFailed:
      return "line_search_failed";
    case Termination::kSolverFailed:
      return "solver_failed";
  }
  return "unknown";
}

Termination termination_from_string(const std::string& s) {
  if (s == "converged") return Termination::kConverged;
  if (s == "max_iterations") return Termination::kMaxIterations;
  if (s == "line_search_failed") return Termination::kLineSearchFailed;
  if (s == "solver_failed") return Termination::kSolverFailed;
  throw std::invalid_argument("unknown termination reason: " + s);
}

std::string to_string(Policy p) { return p == Policy::kNewton ? "newton" : "gradient"; }

Policy policy_from_string(const std::string& s) {
  if (s == "newton") return Policy::kNewton;
  if (s == "gradient") return Policy::kGradient;
  throw std::invalid_argument("unknown descent policy '" + s + "' (expected newton|gradient)");
}

void validate(const DescentOptions& options) {
  if (!(options.tol_E > 0.0)) throw std::invalid_argument("tol_E must be positive");
  if (options.max_iter < 0) throw std::invalid_argument("max_iter must be non-negative");
  if (!(options.armijo > 0.0 && options.armijo < 1.0)) {
    throw std::invalid_argument("armijo constant must lie in (0, 1)");
  }
  if (!(options.min_step > 0.0) || !(options.initial_step > options.min_step)) {
    throw std::invalid_argument("step bounds must satisfy 0 < min_step < initial_step");
  }
}

DescentResult armijo_descent(const DescentProblem& problem, Field x0,
                             const DescentOptions& options) {
  validate(options);
  DescentResult result;
  result.x = std::move(x0);
  DescentTrace& trace = result.trace;

  double energy = 0.0;
  Direction dir;
  try {
    energy = problem.energy(result.x);
    dir = problem.direction(result.x, energy);
  } catch (const SolverFailure& e) {
    trace.termination = Termination::kSolverFailed;
    trace.message = e.what();
    return result;
  }
  trace.entries.push_back({0, energy, dir.grad_norm, 0.0, dir.inner_iterations});
  if (options.observer) options.observer(0, result.x);

  Field trial(result.x.size());
  for (int k = 1;; ++k) {
    if (energy <= options.tol_E) {
      trace.termination = Termination::kConverged;
      break;
    }
    if (k > options.max_iter) {
      trace.termination = Termination::kMaxIterations;
      break;
    }
    if (!(dir.slope < 0.0)) {
      trace.termination = Termination::kLineSearchFailed;
      trace.message = "search direction is not a descent direction";
      break;
    }
    double tau = options.initial_step;
    bool accepted = false;
    double trial_energy = std::numeric_limits<double>::infinity();
    while (tau >= options.min_step) {
      for (std::size_t i = 0; i < trial.size(); ++i) {
        trial[i] = result.x[i] + tau * dir.direction[i];
      }
      try {
        trial_energy = problem.energy(trial);
      } catch (const SolverFailure&) {
        trial_energy = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(trial_energy) && trial_energy < energy &&
          trial_energy <= energy + options.armijo * tau * dir.slope) {
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) {
      trace.termination = Termination::kLineSearchFailed;
      trace.message = "no sufficient decrease for step >= min_step";
      break;
    }
    result.x.swap(trial);
    energy = trial_energy;
    try {
      dir = problem.direction(result.x, energy);
    } catch (const SolverFailure& e) {
      trace.entries.push_back({k, energy, 0.0, tau, 0});
      trace.termination = Termination::kSolverFailed;
      trace.message = e.what();
      break;
    }
    trace.entries.push_back({k, energy, dir.grad_norm, tau, dir.inner_iterations});
    if (options.observer) options.observer(k, result.x);
  }
  return result;
}

}  // namespace varerr
