#include "varerr/descent.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace varerr {
namespace {

// E(x) = 1/2 sum c_k x_k^2, steepest descent direction -c x.
DescentProblem diagonal_quadratic(Field c) {
  DescentProblem p;
  p.energy = [c](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += 0.5 * c[k] * x[k] * x[k];
    return s;
  };
  p.direction = [c](std::span<const double> x, double) {
    Direction d;
    d.direction.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      d.direction[k] = -c[k] * x[k];
      d.slope -= c[k] * c[k] * x[k] * x[k];
    }
    d.grad_norm = std::sqrt(-d.slope);
    return d;
  };
  return p;
}

TEST(Descent, StartingAtTheMinimizerReturnsImmediately) {
  const auto p = diagonal_quadratic({1.0, 2.0});
  const DescentResult r = armijo_descent(p, {0.0, 0.0}, {});
  EXPECT_TRUE(r.trace.converged());
  EXPECT_EQ(r.trace.iterations(), 0);
  ASSERT_EQ(r.trace.entries.size(), 1u);
  EXPECT_EQ(r.trace.entries[0].step, 0.0);
}

TEST(Descent, AcceptedStepsStrictlyDecrease) {
  const auto p = diagonal_quadratic({1.0, 4.0, 9.0});
  DescentOptions o;
  o.tol_E = 1e-14;
  o.max_iter = 500;
  int observed = 0;
  o.observer = [&](int it, std::span<const double>) { EXPECT_EQ(it, observed++); };
  const DescentResult r = armijo_descent(p, {1.0, 1.0, 1.0}, o);
  EXPECT_TRUE(r.trace.converged());
  EXPECT_EQ(observed, r.trace.iterations() + 1);
  for (std::size_t k = 1; k < r.trace.entries.size(); ++k) {
    EXPECT_LT(r.trace.entries[k].energy, r.trace.entries[k - 1].energy);
    EXPECT_GT(r.trace.entries[k].step, 0.0);
    EXPECT_LE(r.trace.entries[k].step, 1.0);
  }
  EXPECT_LE(r.trace.final_energy(), 1e-14);
}

TEST(Descent, StopsAtMaxIterations) {
  const auto p = diagonal_quadratic({1.0, 100.0});
  DescentOptions o;
  o.tol_E = 1e-30;
  o.max_iter = 3;
  const DescentResult r = armijo_descent(p, {1.0, 1.0}, o);
  EXPECT_EQ(r.trace.termination, Termination::kMaxIterations);
  EXPECT_EQ(r.trace.iterations(), 3);
}

TEST(Descent, AscentDirectionFailsTheLineSearch) {
  auto p = diagonal_quadratic({1.0});
  p.direction = [](std::span<const double> x, double) {
    Direction d;
    d.direction = {x[0]};
    d.slope = -x[0] * x[0];  // lies about the slope
    return d;
  };
  const DescentResult r = armijo_descent(p, {1.0}, {});
  EXPECT_EQ(r.trace.termination, Termination::kLineSearchFailed);
  EXPECT_EQ(r.x, Field{1.0});
}

TEST(Descent, DirectionFailureIsRecorded) {
  auto p = diagonal_quadratic({1.0});
  p.direction = [](std::span<const double>, double) -> Direction {
    throw SolverFailure("inner solve diverged");
  };
  const DescentResult r = armijo_descent(p, {1.0}, {});
  EXPECT_EQ(r.trace.termination, Termination::kSolverFailed);
  EXPECT_NE(r.trace.message.find("inner solve diverged"), std::string::npos);
}

TEST(Descent, ValidatesOptions) {
  DescentOptions o;
  o.tol_E = 0.0;
  EXPECT_THROW(validate(o), std::invalid_argument);
  o = {};
  o.armijo = 1.0;
  EXPECT_THROW(validate(o), std::invalid_argument);
  o = {};
  o.min_step = 2.0;
  EXPECT_THROW(validate(o), std::invalid_argument);
  EXPECT_NO_THROW(validate(DescentOptions{}));
}

TEST(Descent, NamesRoundTrip) {
  for (auto p : {Policy::kNewton, Policy::kGradient})
    EXPECT_EQ(policy_from_string(to_string(p)), p);
  for (auto t : {Termination::kConverged, Termination::kMaxIterations,
                 Termination::kLineSearchFailed, Termination::kSolverFailed}) {
    EXPECT_EQ(termination_from_string(to_string(t)), t);
  }
  EXPECT_THROW(policy_from_string("bfgs"), std::invalid_argument);
}

}  // namespace
}  // namespace varerr
