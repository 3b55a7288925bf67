#pragma once

// Steady 2-D Navier-Stokes on [0,1]^2 with no-slip walls on a MAC grid of
// n x n cells (h = 1/n). Velocities live on interior faces: u on vertical
// faces x = i h (i = 1..n-1), v on horizontal faces y = j h (j = 1..n-1).
// Wall-normal faces are zero and tangential no-slip enters through ghost
// values mirrored across the wall.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varerr/descent.hpp"
#include "varerr/hilbert.hpp"

namespace varerr::ns {

class MacOps {
 public:
  explicit MacOps(int n);

  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] double h() const { return 1.0 / n_; }
  [[nodiscard]] std::size_t n_u() const { return std::size_t(n_ - 1) * std::size_t(n_); }
  [[nodiscard]] std::size_t size() const { return 2 * n_u(); }
  [[nodiscard]] std::size_t n_cells() const { return std::size_t(n_) * std::size_t(n_); }
  /// u-face at x = i h, y = (j + 1/2) h; 1 <= i <= n-1, 0 <= j < n.
  [[nodiscard]] std::size_t u_index(int i, int j) const {
    return std::size_t(i - 1) * std::size_t(n_) + std::size_t(j);
  }
  /// v-face at x = (i + 1/2) h, y = j h; 0 <= i < n, 1 <= j <= n-1.
  [[nodiscard]] std::size_t v_index(int i, int j) const {
    return n_u() + std::size_t(i) * std::size_t(n_ - 1) + std::size_t(j - 1);
  }
  [[nodiscard]] std::size_t cell(int i, int j) const {
    return std::size_t(i) * std::size_t(n_) + std::size_t(j);
  }

  /// Per-cell divergence D w.
  void divergence(std::span<const double> w, std::span<double> out) const;
  /// D^T p (so the face gradient of a cell field is -D^T p).
  void divergence_transpose(std::span<const double> p, std::span<double> out) const;
  /// Solves D D^T phi = s on zero-mean cell fields by a cosine transform.
  SolveReport poisson(std::span<const double> s, std::span<double> phi) const;

  /// Dirichlet vector-Laplacian Gram: a^T K b approximates int grad a : grad b.
  void stiffness(std::span<const double> w, std::span<double> out) const;
  [[nodiscard]] double k_inner(std::span<const double> a, std::span<const double> b) const;

  /// (a . grad) b by central differences with averaged transverse velocity.
  void convection(std::span<const double> a, std::span<const double> b,
                  std::span<double> out) const;
  /// S_a b with S_a = h^2 (C(a) - C(a)^T) / 2, so c^T S_a b is skew in (b, c).
  void skew_convection(std::span<const double> a, std::span<const double> b,
                       std::span<double> out) const;
  /// Gradient with respect to a of c^T S_a b.
  void skew_convection_da(std::span<const double> b, std::span<const double> c,
                          std::span<double> out) const;
  /// c^T S_a b
  [[nodiscard]] double trilinear(std::span<const double> a, std::span<const double> b,
                                 std::span<const double> c) const;
  /// h^2 c^T C(a) b (no skew-symmetrization)
  [[nodiscard]] double trilinear_naive(std::span<const double> a, std::span<const double> b,
                                       std::span<const double> c) const;

  /// Samples a vector function at face centres.
  [[nodiscard]] Field sample(const std::function<double(double, double)>& fu,
                             const std::function<double(double, double)>& fv) const;
  /// Discrete curl of a stream function given at cell corners (x = i h, y = j h).
  [[nodiscard]] Field curl(const std::function<double(double, double)>& psi) const;

 private:
  struct Entry {
    std::size_t out, in, a;
    double coef;
  };
  int n_;
  std::vector<Entry> entries_;   // C(a)[out][in] += coef * a[a]
  std::vector<double> cosines_;  // n x n, row k: cos(k pi (i+1/2) / n)
  std::vector<double> eig_;      // 1-D eigenvalues of the Neumann cell Laplacian
};

struct Projection {
  Field velocity;
  Field pressure;  // zero-mean multiplier
  SolveReport report;
};

/// w - grad(phi) with div grad phi = div w; idempotent.
Projection leray_project(const MacOps& ops, std::span<const double> w);
double max_divergence(const MacOps& ops, std::span<const double> w);

struct NsSettings {
  double cg_tol = 1e-12;
  int cg_max_iter = 5000;
};

class NSProblem {
 public:
  NSProblem(int n, double nu, Field force, NsSettings settings = {});

  [[nodiscard]] const MacOps& ops() const { return ops_; }
  [[nodiscard]] double nu() const { return nu_; }
  /// Face values of the body force (not area-weighted).
  [[nodiscard]] const Field& force() const { return force_; }
  [[nodiscard]] const NsSettings& settings() const { return settings_; }

 private:
  MacOps ops_;
  double nu_;
  Field force_;
  NsSettings settings_;
};

/// Force for u* = curl(A sin^2(pi x) sin^2(pi y)), p* = cos(pi x) cos(pi y).
struct Manufactured {
  Field force;
  Field exact;           // discrete curl of the stream function (divergence-free)
  Field exact_pressure;  // p* at cell centres, mean removed
};
Manufactured manufactured(int n, double nu, double amplitude);

/// A (-(y - y0), x - x0) exp(-|x - x0|^2 / s^2)
Field gaussian_vortex_force(int n, double amplitude, double x0, double y0, double width);

struct Residual {
  Field velocity;  // U
  Field pressure;
  SolveReport report;
};

/// U in the divergence-free space with
/// int grad U : grad V = -int (nu grad u - u (x) u) : grad V + <f, V>.
Residual residual(const NSProblem& p, std::span<const double> u);
double energy(const NSProblem& p, std::span<const double> u);
Field euclidean_gradient(const NSProblem& p, std::span<const double> u);

struct Gradient {
  Field w;
  Field big_u;
  SolveReport report;
};
/// Riesz representative of E'(u) within the divergence-free space.
Gradient gradient(const NSProblem& p, std::span<const double> u);

DescentResult descend(const NSProblem& p, Field u0, const DescentOptions& options);

struct SmallnessReport {
  double force_norm = 0.0;  // dual norm of f over the divergence-free space
  double nu = 0.0;
  double quotient = 0.0;  // force_norm / nu^2
  double sqrt_2e = 0.0;
  double velocity_norm = 0.0;     // ||grad v||
  double embedding_c = 0.0;       // estimated H1 -> L4 constant
  double prefactor = 0.0;         // nu - (C^2/nu)(force_norm + sqrt_2e)
  bool inequality_holds = false;  // nu ||v|| <= force_norm + sqrt(2E) (+ roundoff)
  bool small_data = false;        // prefactor > 0
};

SmallnessReport smallness_diagnostic(const NSProblem& p, std::span<const double> v,
                                     double embedding_c);
double force_dual_norm(const NSProblem& p);
/// max ||v||_L4 / ||grad v|| over random divergence-free fields.
double estimate_l4_embedding(const MacOps& ops, int n_samples, std::uint64_t seed);

/// max(|b(v; u, v) + b(v; v, u)|, |b(v; u, u)|) with the skew trilinear form.
double skew_symmetry_check(const MacOps& ops, std::span<const double> u, std::span<const double> v);
/// Same two integrals with the plain central-difference advection.
double naive_symmetry_check(const MacOps& ops, std::span<const double> u,
                            std::span<const double> v);

/// Random smooth divergence-free field (curl of low sine modes).
Field random_div_free(const MacOps& ops, std::mt19937_64& rng, double amplitude = 1.0);

}  // namespace varerr::ns
