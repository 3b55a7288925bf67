#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include "varerr/hilbert.hpp"
#include "varerr/trace.hpp"

namespace varerr {

/// Raised by a module when an inner solve does not converge or produces
/// non-finite values.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Policy { kNewton, kGradient };

std::string to_string(Policy p);
Policy policy_from_string(const std::string& s);

struct DescentOptions {
  double tol_E = 1e-10;
  int max_iter = 100;
  double armijo = 1e-4;
  double min_step = 1e-12;
  double initial_step = 1.0;
  // Called with every accepted iterate, including the starting point.
  std::function<void(int iteration, std::span<const double> x)> observer;
};

void validate(const DescentOptions& options);

/// Search direction at an iterate, with slope = <E'(x), direction>.
struct Direction {
  Field direction;
  double slope = 0.0;
  double grad_norm = 0.0;
  int inner_iterations = 0;
};

struct DescentProblem {
  std::function<double(std::span<const double>)> energy;
  std::function<Direction(std::span<const double> x, double energy)> direction;
};

struct DescentResult {
  Field x;
  DescentTrace trace;
};

/// x <- x + tau d with Armijo backtracking (tau halves from initial_step).
/// Accepted steps strictly decrease E; stops at E <= tol_E, at max_iter, or
/// when the step falls below min_step (best iterate returned).
DescentResult armijo_descent(const DescentProblem& problem, Field x0,
                             const DescentOptions& options);

}  // namespace varerr
