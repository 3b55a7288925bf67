#include <benchmark/benchmark.h>

#include <random>

#include "varerr/elliptic.hpp"
#include "varerr/navier_stokes.hpp"
#include "varerr/ode.hpp"
#include "varerr/wave_linear.hpp"
#include "varerr/wave_nonlinear.hpp"

namespace {

using varerr::Field;

void BM_OdeNewtonDirection(benchmark::State& state) {
  const varerr::ode::OdeProblem p(varerr::ode::sine_field(1.0), {0.5}, 2.0,
                                  static_cast<int>(state.range(0)));
  std::mt19937_64 rng(1);
  const Field z = varerr::ode::random_path(p, rng, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(varerr::ode::newton_direction(p, z).data());
}
BENCHMARK(BM_OdeNewtonDirection)->Arg(1000)->Arg(10000);

void BM_EllipticResidual(benchmark::State& state) {
  const varerr::elliptic::EllipticProblem p(varerr::elliptic::arctan_flux(),
                                            static_cast<int>(state.range(0)));
  std::mt19937_64 rng(2);
  const Field v = varerr::elliptic::random_field(p, rng);
  for (auto _ : state) benchmark::DoNotOptimize(varerr::elliptic::residual(p, v).field.data());
}
BENCHMARK(BM_EllipticResidual)->Arg(33)->Arg(65);

void BM_EllipticNewtonStep(benchmark::State& state) {
  const varerr::elliptic::EllipticProblem p(varerr::elliptic::arctan_flux(),
                                            static_cast<int>(state.range(0)));
  std::mt19937_64 rng(3);
  const Field v = varerr::elliptic::random_field(p, rng);
  for (auto _ : state) benchmark::DoNotOptimize(varerr::elliptic::newton_step(p, v).step.data());
}
BENCHMARK(BM_EllipticNewtonStep)->Arg(33)->Arg(65);

void BM_WaveGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const varerr::wave::WaveProblem p(varerr::wave::make_grid(n, n, 0.5, 1.0),
                                    varerr::wave::manufactured_forcing(1.0, 1, 1.0));
  std::mt19937_64 rng(4);
  const Field u = varerr::wave::random_trial_field(p.ops(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(varerr::wave::gradient(p, u).data());
}
BENCHMARK(BM_WaveGradient)->Arg(33)->Arg(65)->Arg(129);

void BM_NlWaveNewtonDirection(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const varerr::wave::NLWaveProblem p(varerr::wave::make_grid(n, n, 0.5, 1.0),
                                      varerr::wave::manufactured_arctan(0.5, 1.0, 1, 1.0));
  std::mt19937_64 rng(5);
  const Field u = varerr::wave::random_trial_field(p.ops(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(varerr::wave::newton_direction(p, u).data());
}
BENCHMARK(BM_NlWaveNewtonDirection)->Arg(17)->Arg(33);

void BM_LerayProject(benchmark::State& state) {
  const varerr::ns::MacOps ops(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  Field w(ops.size());
  for (double& x : w) x = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(varerr::ns::leray_project(ops, w).velocity.data());
}
BENCHMARK(BM_LerayProject)->Arg(32)->Arg(64)->Arg(128);

void BM_NsResidual(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const varerr::ns::Manufactured m = varerr::ns::manufactured(n, 1.0, 0.25);
  const varerr::ns::NSProblem p(n, 1.0, m.force);
  std::mt19937_64 rng(7);
  const Field u = varerr::ns::random_div_free(p.ops(), rng, 0.2);
  int cg = 0;
  for (auto _ : state) {
    const varerr::ns::Residual r = varerr::ns::residual(p, u);
    cg = r.report.iterations;
    benchmark::DoNotOptimize(r.velocity.data());
  }
  state.counters["cg_iterations"] = cg;
}
BENCHMARK(BM_NsResidual)->Arg(16)->Arg(32)->Arg(64);

}  // namespace
