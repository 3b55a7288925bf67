#include "varerr/navier_stokes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

namespace varerr::ns {
namespace {

Field random_field(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Field u(n);
  for (double& x : u) x = normal(rng);
  return u;
}

double k_norm(const MacOps& ops, std::span<const double> u) { return std::sqrt(ops.k_inner(u, u)); }

TEST(MacOps, StiffnessIsSymmetricPositiveDefinite) {
  const MacOps ops(6);
  const Eigen::MatrixXd k = oracles::dense_of(
      [&](std::span<const double> x, std::span<double> y) { ops.stiffness(x, y); }, ops.size());
  EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues().minCoeff(), 0.0);
}

TEST(MacOps, DivergenceTransposeIsTheAdjoint) {
  std::mt19937_64 rng(1);
  const MacOps ops(8);
  const Field w = random_field(ops.size(), rng), p = random_field(ops.n_cells(), rng);
  Field dw(ops.n_cells()), dtp(ops.size());
  ops.divergence(w, dw);
  ops.divergence_transpose(p, dtp);
  EXPECT_NEAR(dot(dw, p), dot(w, dtp), 1e-12 * (1.0 + std::abs(dot(dw, p))));
}

TEST(MacOps, PoissonSolvesTheCellLaplacian) {
  std::mt19937_64 rng(2);
  const MacOps ops(8);
  Field s = random_field(ops.n_cells(), rng);
  double mean = 0.0;
  for (double x : s) mean += x / static_cast<double>(s.size());
  for (double& x : s) x -= mean;
  Field phi(ops.n_cells()), dtp(ops.size()), back(ops.n_cells());
  EXPECT_TRUE(ops.poisson(s, phi).converged);
  ops.divergence_transpose(phi, dtp);
  ops.divergence(dtp, back);
  EXPECT_LE(oracles::max_abs_diff(back, s), 1e-11);
}

TEST(Projection, DivergenceFreeFieldIsUnchanged) {
  std::mt19937_64 rng(3);
  const MacOps ops(16);
  const Field w = random_div_free(ops, rng);
  EXPECT_LE(max_divergence(ops, w), 1e-12);
  EXPECT_LE(oracles::max_abs_diff(leray_project(ops, w).velocity, w), 1e-12);
}

TEST(Projection, GradientFieldIsAnnihilated) {
  std::mt19937_64 rng(4);
  const MacOps ops(16);
  const Field phi = random_field(ops.n_cells(), rng);
  Field grad(ops.size());
  ops.divergence_transpose(phi, grad);
  EXPECT_LE(norm2(leray_project(ops, grad).velocity), 1e-11 * norm2(grad));
}

TEST(Projection, IdempotentAndDivergenceFree) {
  std::mt19937_64 rng(5);
  const MacOps ops(16);
  for (int s = 0; s < 5; ++s) {
    const Field once = leray_project(ops, random_field(ops.size(), rng)).velocity;
    EXPECT_LE(max_divergence(ops, once), 1e-10);
    EXPECT_LE(oracles::max_abs_diff(leray_project(ops, once).velocity, once), 1e-10);
  }
}

TEST(Projection, RejectsNonFiniteInput) {
  const MacOps ops(4);
  Field w(ops.size(), 0.0);
  w[3] = std::nan("");
  EXPECT_THROW(leray_project(ops, w), std::invalid_argument);
  EXPECT_THROW(leray_project(ops, Field(5, 0.0)), ShapeError);
}

TEST(NsResidual, ZeroForceZeroField) {
  const NSProblem p(8, 1.0, Field(MacOps(8).size(), 0.0));
  const Field zero(p.ops().size(), 0.0);
  EXPECT_EQ(norm2(residual(p, zero).velocity), 0.0);
  EXPECT_EQ(energy(p, zero), 0.0);
}

TEST(NsResidual, MatchesDenseDivergenceFreeSolve) {
  std::mt19937_64 rng(6);
  const int n = 8;
  const MacOps ops(n);
  const NSProblem p(n, 0.7, gaussian_vortex_force(n, 3.0, 0.4, 0.6, 0.2));
  const oracles::DenseStokes dense(ops);
  const double h2 = ops.h() * ops.h();

  // u = 0: U is the projected Poisson solve of the force.
  Field load = p.force();
  scale(h2, load);
  const Field ref0 = dense.solve(load);
  const Residual r0 = residual(p, Field(ops.size(), 0.0));
  EXPECT_LE(oracles::max_abs_diff(r0.velocity, ref0), 1e-10 * (1.0 + norm2(ref0)));

  // u != 0: right-hand side -nu K u - S_u u + h^2 f.
  const Field u = random_div_free(ops, rng, 0.5);
  Field rhs(ops.size()), s(ops.size());
  ops.stiffness(u, rhs);
  ops.skew_convection(u, u, s);
  for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = -p.nu() * rhs[k] - s[k] + h2 * p.force()[k];
  const Field ref = dense.solve(rhs);
  const Residual r = residual(p, u);
  EXPECT_LE(oracles::max_abs_diff(r.velocity, ref), 1e-10 * (1.0 + norm2(ref)));
  const double e_ref = 0.5 * oracles::to_eigen(ref).dot(dense.k * oracles::to_eigen(ref));
  EXPECT_NEAR(energy(p, u), e_ref, 1e-8 * (1.0 + e_ref));
  EXPECT_LE(max_divergence(ops, r.velocity), 1e-10);
}

TEST(NsResidual, ManufacturedConsistencyUnderRefinement) {
  double prev = 0.0;
  for (int n : {16, 32, 64}) {
    const Manufactured m = manufactured(n, 1.0, 1.0);
    const NSProblem p(n, 1.0, m.force);
    const Residual r = residual(p, m.exact);
    const double un = k_norm(p.ops(), r.velocity);
    if (prev > 0.0) {
      EXPECT_GE(std::log2(prev / un), 0.8) << n;
    }
    prev = un;
    EXPECT_LE(max_divergence(p.ops(), m.exact), 1e-12);
  }
}

TEST(NsGradient, ZeroResidualZeroGradient) {
  const NSProblem p(8, 1.0, Field(MacOps(8).size(), 0.0));
  const Gradient g = gradient(p, Field(p.ops().size(), 0.0));
  EXPECT_EQ(norm2(g.w), 0.0);
}

TEST(NsGradient, FiniteDifferenceConsistency) {
  std::mt19937_64 rng(7);
  const Manufactured m = manufactured(16, 1.0, 0.25);
  const NSProblem p(16, 1.0, m.force);
  FdCheckOptions o;
  o.constrain = [&](std::span<double> d) {
    const Field w = leray_project(p.ops(), d).velocity;
    std::copy(w.begin(), w.end(), d.begin());
  };
  FdCheckOptions riesz = o;
  riesz.pairing = [&](std::span<const double> g, std::span<const double> d) {
    return p.ops().k_inner(g, d);
  };
  const auto e = [&](std::span<const double> x) { return energy(p, x); };
  for (int s = 0; s < 3; ++s) {
    o.seed = riesz.seed = rng();
    const Field u = random_div_free(p.ops(), rng, 0.3);
    EXPECT_LE(fd_gradient_check(
                  e, [&](std::span<const double> x) { return euclidean_gradient(p, x); }, u, o),
              1e-5);
    EXPECT_LE(fd_gradient_check(
                  e, [&](std::span<const double> x) { return gradient(p, x).w; }, u, riesz),
              1e-5);
  }
}

TEST(NsGradient, AdjointIdentityWithTheTrilinearTerm) {
  // Testing the adjoint system with U gives -<w, U>_K = nu |U|_K^2 - b(U, U, u).
  std::mt19937_64 rng(8);
  const Manufactured m = manufactured(32, 1.0, 0.25);
  const NSProblem p(32, 1.0, m.force);
  const MacOps& ops = p.ops();
  for (int s = 0; s < 10; ++s) {
    const Field u = random_div_free(ops, rng, 0.2);
    const Gradient g = gradient(p, u);
    EXPECT_LE(max_divergence(ops, g.w), 1e-10);
    const double uu = ops.k_inner(g.big_u, g.big_u);
    const double defect =
        -ops.k_inner(g.w, g.big_u) - p.nu() * uu + ops.trilinear(g.big_u, g.big_u, u);
    EXPECT_LE(std::abs(defect), 1e-10 * p.nu() * uu) << s;
  }
}

TEST(NsSkew, SkewFormCancelsNaiveFormDoesNot) {
  std::mt19937_64 rng(9);
  double naive[2];
  int idx = 0;
  for (int n : {16, 32}) {
    const MacOps ops(n);
    std::mt19937_64 r(9);
    naive[idx] = 0.0;
    for (int s = 0; s < 10; ++s) {
      const Field u = random_div_free(ops, r), v = random_div_free(ops, r);
      EXPECT_LE(skew_symmetry_check(ops, u, v), 1e-10);
      naive[idx] = std::max(naive[idx], naive_symmetry_check(ops, u, v));
    }
    EXPECT_EQ(skew_symmetry_check(ops, Field(ops.size(), 0.0), random_div_free(ops, rng)), 0.0);
    ++idx;
  }
  EXPECT_GT(naive[0], 1e-6);
  // The naive defect is a truncation error and shrinks under refinement.
  EXPECT_GT(naive[0] / naive[1], 1.5);
}

TEST(NsDescend, ZeroForceConvergesToZero) {
  std::mt19937_64 rng(10);
  const NSProblem p(16, 1.0, Field(MacOps(16).size(), 0.0));
  DescentOptions o;
  o.tol_E = 1e-20;
  o.max_iter = 200;
  const DescentResult r = descend(p, random_div_free(p.ops(), rng, 0.3), o);
  ASSERT_TRUE(r.trace.converged());
  EXPECT_LE(k_norm(p.ops(), r.x), 1e-8);
}

TEST(NsDescend, ManufacturedSmallDataRun) {
  double err[2];
  int idx = 0;
  for (int n : {16, 32}) {
    const Manufactured m = manufactured(n, 1.0, 0.25);
    const NSProblem p(n, 1.0, m.force);
    DescentOptions o;
    o.tol_E = 1e-10;
    o.max_iter = 200;
    const DescentResult r = descend(p, {}, o);
    ASSERT_TRUE(r.trace.converged()) << n;
    EXPECT_LE(r.trace.final_energy(), 1e-10);
    EXPECT_LE(max_divergence(p.ops(), r.x), 1e-10);
    const Field d = lincomb(1.0, r.x, -1.0, m.exact);
    err[idx++] = norm2(d) * p.ops().h();
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 0.8);
}

TEST(NsDescend, TwoRandomStartsShareTheLimit) {
  std::mt19937_64 rng(11);
  const Manufactured m = manufactured(16, 1.0, 0.25);
  const NSProblem p(16, 1.0, m.force);
  DescentOptions o;
  o.tol_E = 1e-20;
  o.max_iter = 300;
  const DescentResult a = descend(p, random_div_free(p.ops(), rng, 0.2), o);
  const DescentResult b = descend(p, random_div_free(p.ops(), rng, 0.2), o);
  ASSERT_TRUE(a.trace.converged());
  ASSERT_TRUE(b.trace.converged());
  EXPECT_LE(k_norm(p.ops(), lincomb(1.0, a.x, -1.0, b.x)), 1e-6);
}

TEST(NsSmallness, ZeroForce) {
  const NSProblem p(8, 0.5, Field(MacOps(8).size(), 0.0));
  const SmallnessReport r = smallness_diagnostic(p, Field(p.ops().size(), 0.0), 0.3);
  EXPECT_EQ(r.quotient, 0.0);
  EXPECT_EQ(r.prefactor, 0.5);
  EXPECT_EQ(r.nu, 0.5);
  EXPECT_TRUE(r.small_data);
  EXPECT_TRUE(r.inequality_holds);
}

TEST(NsSmallness, PrefactorIsMonotoneInViscosity) {
  const Manufactured m = manufactured(16, 1.0, 0.25);
  const double c = estimate_l4_embedding(MacOps(16), 20, 3);
  double prev = -1e300;
  bool flipped = false;
  for (double nu : {0.005, 0.02, 0.1, 0.5, 1.0, 2.0}) {
    const NSProblem p(16, nu, m.force);
    const SmallnessReport r = smallness_diagnostic(p, Field(p.ops().size(), 0.0), c);
    EXPECT_GT(r.prefactor, prev) << nu;
    if (prev < 0.0 && r.prefactor > 0.0) flipped = true;
    prev = r.prefactor;
  }
  EXPECT_TRUE(flipped);
}

TEST(NsSmallness, ReportMatchesDenseRecomputation) {
  std::mt19937_64 rng(12);
  const int n = 8;
  const MacOps ops(n);
  const double nu = 0.7, c = 0.3;
  const NSProblem p(n, nu, gaussian_vortex_force(n, 2.0, 0.5, 0.5, 0.25));
  const oracles::DenseStokes dense(ops);
  const double h2 = ops.h() * ops.h();
  const Field v = random_div_free(ops, rng, 0.1);

  Field load = p.force();
  scale(h2, load);
  const Eigen::VectorXd g = oracles::to_eigen(dense.solve(load));
  const double fnorm = std::sqrt(g.dot(dense.k * g));

  Field rhs(ops.size()), s(ops.size());
  ops.stiffness(v, rhs);
  ops.skew_convection(v, v, s);
  for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = -nu * rhs[k] - s[k] + h2 * p.force()[k];
  const Eigen::VectorXd big_u = oracles::to_eigen(dense.solve(rhs));
  const double sqrt_2e = std::sqrt(big_u.dot(dense.k * big_u));
  const Eigen::VectorXd ve = oracles::to_eigen(v);
  const double vnorm = std::sqrt(ve.dot(dense.k * ve));

  const SmallnessReport r = smallness_diagnostic(p, v, c);
  EXPECT_NEAR(r.force_norm, fnorm, 1e-9 * fnorm);
  EXPECT_NEAR(r.quotient, fnorm / (nu * nu), 1e-9 * fnorm / (nu * nu));
  EXPECT_NEAR(r.sqrt_2e, sqrt_2e, 1e-9 * sqrt_2e);
  EXPECT_NEAR(r.velocity_norm, vnorm, 1e-10 * vnorm);
  EXPECT_NEAR(r.prefactor, nu - c * c / nu * (fnorm + sqrt_2e), 1e-9);
  EXPECT_EQ(r.inequality_holds, nu * vnorm <= fnorm + sqrt_2e);
  EXPECT_EQ(r.small_data, r.prefactor > 0.0);
}

TEST(NsSmallness, ForceNormMatchesDenseOracle) {
  const int n = 8;
  const MacOps ops(n);
  const NSProblem p(n, 1.0, gaussian_vortex_force(n, 2.0, 0.5, 0.5, 0.25));
  const oracles::DenseStokes dense(ops);
  Field load = p.force();
  scale(ops.h() * ops.h(), load);
  const Eigen::VectorXd g = oracles::to_eigen(dense.solve(load));
  EXPECT_NEAR(force_dual_norm(p), std::sqrt(g.dot(dense.k * g)), 1e-10);
}

}  // namespace
}  // namespace varerr::ns
