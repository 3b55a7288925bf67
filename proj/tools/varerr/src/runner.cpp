#include "varerr_cli/runner.hpp"

#include <fmt/core.h>
#include <fmt/os.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>

#include "varerr/elliptic.hpp"
#include "varerr/navier_stokes.hpp"
#include "varerr/ode.hpp"
#include "varerr/wave_linear.hpp"
#include "varerr/wave_nonlinear.hpp"

namespace varerr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Everything a family hands back to the shared certification/reporting path.
struct FamilyRun {
  DescentResult result;
  CoercivityBinding binding;  // center is filled in from result.x
  double h = 0.0;
  std::optional<double> error;
  json diagnostics = json::object();
  std::vector<std::string> flags;
};

DescentOptions descent_options(const ExperimentConfig& c) {
  DescentOptions o;
  o.tol_E = c.tol_E;
  o.max_iter = c.max_iter;
  return o;
}

Field difference(std::span<const double> a, std::span<const double> b) {
  return lincomb(1.0, a, -1.0, b);
}

std::optional<double> ode_exact(const ExperimentConfig& c, double x0, double t) {
  const double a = c.ode.coefficient;
  if (c.ode.field == "linear") return x0 * std::exp(a * t);
  if (c.ode.field == "logistic") {
    if (x0 == 0.0) return 0.0;
    return 1.0 / (1.0 + (1.0 - x0) / x0 * std::exp(-a * t));
  }
  return std::nullopt;
}

FamilyRun run_ode(const ExperimentConfig& c, int k, std::mt19937_64& rng) {
  const int dim = static_cast<int>(c.ode.x0.size());
  auto p = std::make_shared<ode::OdeProblem>(ode::make_field(c.ode.field, c.ode.coefficient, dim),
                                             c.ode.x0, c.ode.horizon, k);
  Field z0 = c.initial == "random" ? ode::random_path(*p, rng) : ode::zero_path(*p);
  FamilyRun run;
  run.diagnostics["pairing_defect_at_start"] = ode::pairing_check(*p, z0);
  run.result = ode::descend(*p, std::move(z0), c.effective_policy(), descent_options(c));
  run.h = p->step();

  double lo = 0.0, hi = 0.0;
  for (int i = 0; i <= k; ++i) {
    for (int d = 0; d < dim; ++d) {
      const double x = c.ode.x0[std::size_t(d)] + run.result.x[std::size_t(i * dim + d)];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (hi - lo < 1.0) {
    lo -= 0.5;
    hi += 0.5;
  }
  const ode::LipschitzReport lip = ode::check_lipschitz(p->field(), lo, hi, 100, c.seed);
  run.diagnostics["lipschitz"] = {{"sampled_max", lip.max_norm},
                                  {"declared", lip.declared},
                                  {"exceeds_declared", lip.exceeds_declared}};

  bool have_exact = true;
  double err = 0.0;
  for (int i = 0; i <= k && have_exact; ++i) {
    for (int d = 0; d < dim; ++d) {
      const double x0 = c.ode.x0[std::size_t(d)];
      const auto exact = ode_exact(c, x0, p->time(i));
      if (!exact) {
        have_exact = false;
        break;
      }
      err = std::max(err, std::abs(x0 + run.result.x[std::size_t(i * dim + d)] - *exact));
    }
  }
  if (have_exact) {
    run.error = err;
    run.diagnostics["max_node_error"] = err;
  }

  run.binding.energy = [p](std::span<const double> z) { return ode::energy(*p, z); };
  run.binding.distance_sq = [p](std::span<const double> a, std::span<const double> b) {
    const Field d = difference(a, b);
    return ode::h_inner(*p, d, d);
  };
  const double amp = c.coercivity.amplitude;
  run.binding.sample = [p, amp](std::mt19937_64& r) { return ode::random_path(*p, r, amp); };
  return run;
}

FamilyRun run_elliptic(const ExperimentConfig& c, int n, std::mt19937_64& rng) {
  const elliptic::FluxMap flux = elliptic::make_flux(c.elliptic.flux);
  elliptic::SolverSettings settings;
  settings.cg_tol = c.cg_tol;
  auto m = std::make_shared<elliptic::Manufactured>(
      elliptic::manufactured(flux, n, c.elliptic.amplitude, settings));
  const elliptic::EllipticProblem& p = m->problem;
  Field v0 = c.initial == "random" ? elliptic::random_field(p, rng) : Field(p.grid().size(), 0.0);
  FamilyRun run;
  const double box = 1.0 + std::abs(c.elliptic.amplitude) * std::numbers::pi;
  const elliptic::FluxHypotheses hyp =
      elliptic::check_flux_hypotheses(flux, -box, box, 100, c.seed);
  run.diagnostics["flux"] = {{"max_gradient", hyp.max_gradient},
                             {"declared_bound", flux.bound},
                             {"min_monotonicity", hyp.min_monotonicity},
                             {"monotone", hyp.monotone}};
  if (!hyp.monotone) run.flags.push_back("flux not monotone on the sampled box");
  run.result = elliptic::descend(p, std::move(v0), c.effective_policy(), descent_options(c));
  run.h = p.h();
  run.error = elliptic::l2_error(p, run.result.x, m->exact);
  run.diagnostics["l2_error"] = *run.error;

  run.binding.energy = [m](std::span<const double> v) { return elliptic::energy(m->problem, v); };
  run.binding.distance_sq = [m](std::span<const double> a, std::span<const double> b) {
    const Field d = difference(a, b);
    return elliptic::h1_semi(m->problem, d, d);
  };
  const double amp = c.coercivity.amplitude;
  run.binding.sample = [m, amp](std::mt19937_64& r) {
    return elliptic::random_field(m->problem, r, amp);
  };
  return run;
}

wave::Forcing wave_forcing(const WaveParams& w) {
  if (w.forcing == "zero") return wave::zero_forcing();
  if (w.forcing == "manufactured") return wave::manufactured_forcing(w.amplitude, w.mode, w.length);
  if (w.forcing == "separable") return wave::separable_forcing(w.amplitude, w.mode, w.length);
  return wave::bump_forcing(w.amplitude, w.center_t, w.center_x, w.radius);
}

FamilyRun run_wave(const ExperimentConfig& c, int n, std::mt19937_64& rng) {
  wave::WaveSettings settings;
  settings.cg_tol = c.cg_tol;
  auto p = std::make_shared<wave::WaveProblem>(wave::make_grid(n, n, c.wave.horizon, c.wave.length),
                                               wave_forcing(c.wave), settings);
  Field u0 =
      c.initial == "random" ? wave::random_trial_field(p->ops(), rng) : Field(p->ops().size(), 0.0);
  FamilyRun run;
  run.result = wave::solve(*p, std::move(u0), descent_options(c));
  run.h = p->ops().hx();
  if (p->forcing().exact) {
    const Field d = difference(run.result.x, wave::sample(p->ops(), p->forcing().exact));
    run.error = std::sqrt(p->ops().l2(d, d));
    run.diagnostics["l2_error"] = *run.error;
  }
  run.binding.energy = [p](std::span<const double> u) { return wave::energy(*p, u); };
  run.binding.distance_sq = [p](std::span<const double> a, std::span<const double> b) {
    const Field d = difference(a, b);
    return p->ops().h1(d, d);
  };
  const double amp = c.coercivity.amplitude;
  run.binding.sample = [p, amp](std::mt19937_64& r) {
    return wave::random_trial_field(p->ops(), r, amp);
  };
  return run;
}

wave::WaveNonlinearity nl_choice(const NlWaveParams& w) {
  if (w.nonlinearity == "manufactured_arctan") {
    return wave::manufactured_arctan(w.alpha, w.amplitude, w.mode, w.length);
  }
  const double amp = w.amplitude, k = w.mode * std::numbers::pi / w.length;
  const wave::Source g = [amp, k](double t, double x) { return amp * t * std::sin(k * x); };
  if (w.nonlinearity == "sine_ut") return wave::sine_ut_nonlinearity(w.alpha, g);
  if (w.nonlinearity == "arctan") return wave::arctan_nonlinearity(w.alpha, g);
  return wave::linear_nonlinearity(g);
}

FamilyRun run_nlwave(const ExperimentConfig& c, int n, std::mt19937_64& rng) {
  auto p = std::make_shared<wave::NLWaveProblem>(
      wave::make_grid(n, n, c.nlwave.horizon, c.nlwave.length), nl_choice(c.nlwave));
  Field u0 =
      c.initial == "random" ? wave::random_trial_field(p->ops(), rng) : Field(p->ops().size(), 0.0);
  FamilyRun run;
  const wave::HypothesisReport hyp = wave::check_hypotheses(*p, -1.0, 1.0, 100, c.seed);
  run.diagnostics["hypotheses"] = {{"lipschitz_quotient", hyp.lipschitz_quotient},
                                   {"min_abs_fu", hyp.min_abs_fu},
                                   {"f0_l2", hyp.f0_l2},
                                   {"embedding_d", hyp.embedding_d},
                                   {"lipschitz_ok", hyp.lipschitz_ok},
                                   {"fu_ok", hyp.fu_ok}};
  if (!hyp.lipschitz_ok) run.flags.push_back("nonlinearity Lipschitz quotient >= 1 on sampled box");
  if (!hyp.fu_ok) run.flags.push_back("|f_u| lower bound not met on sampled box");
  run.result = wave::descend(*p, std::move(u0), c.effective_policy(), descent_options(c));
  run.h = p->ops().hx();
  if (p->nonlinearity().exact) {
    const Field d = difference(run.result.x, wave::sample(p->ops(), p->nonlinearity().exact));
    run.error = std::sqrt(p->ops().l2(d, d));
    run.diagnostics["l2_error"] = *run.error;
  }
  run.binding.energy = [p](std::span<const double> u) { return wave::energy(*p, u); };
  run.binding.distance_sq = [p](std::span<const double> a, std::span<const double> b) {
    const Field d = difference(a, b);
    return p->ops().h1(d, d);
  };
  const double amp = c.coercivity.amplitude;
  run.binding.sample = [p, amp](std::mt19937_64& r) {
    return wave::random_trial_field(p->ops(), r, amp);
  };
  return run;
}

json smallness_json(const ns::SmallnessReport& s) {
  return {{"force_norm", s.force_norm},       {"nu", s.nu},
          {"quotient", s.quotient},           {"sqrt_2e", s.sqrt_2e},
          {"velocity_norm", s.velocity_norm}, {"embedding_c", s.embedding_c},
          {"prefactor", s.prefactor},         {"inequality_holds", s.inequality_holds},
          {"small_data", s.small_data}};
}

FamilyRun run_ns(const ExperimentConfig& c, int n, std::mt19937_64& rng) {
  std::optional<ns::Manufactured> m;
  Field force;
  if (c.ns.force == "manufactured") {
    m = ns::manufactured(n, c.ns.nu, c.ns.amplitude);
    force = m->force;
  } else {
    force = ns::gaussian_vortex_force(n, c.ns.amplitude, 0.5, 0.5, 0.15);
  }
  ns::NsSettings settings;
  settings.cg_tol = c.cg_tol;
  auto p = std::make_shared<ns::NSProblem>(n, c.ns.nu, std::move(force), settings);
  Field u0 =
      c.initial == "random" ? ns::random_div_free(p->ops(), rng, 0.3) : Field(p->ops().size(), 0.0);
  FamilyRun run;
  const double emb = ns::estimate_l4_embedding(p->ops(), 50, c.seed);
  const ns::SmallnessReport before = ns::smallness_diagnostic(*p, u0, emb);
  run.diagnostics["smallness_start"] = smallness_json(before);
  if (!before.small_data) {
    spdlog::warn(
        "ns: smallness prefactor {:.3g} <= 0 (|f|/nu^2 = {:.3g}); outside the small-data "
        "regime",
        before.prefactor, before.quotient);
  }

  DescentOptions opts = descent_options(c);
  int iterates = 0, violations = 0;
  const double fnorm = before.force_norm;
  opts.observer = [&](int, std::span<const double> v) {
    ++iterates;
    const double lhs = p->nu() * std::sqrt(std::max(0.0, p->ops().k_inner(v, v)));
    const double rhs = fnorm + std::sqrt(2.0 * ns::energy(*p, v));
    if (lhs > rhs * (1.0 + 1e-12)) ++violations;
  };
  run.result = ns::descend(*p, std::move(u0), opts);
  run.h = p->ops().h();

  ns::SmallnessReport after;
  try {
    after = ns::smallness_diagnostic(*p, run.result.x, emb);
    run.diagnostics["smallness_final"] = smallness_json(after);
  } catch (const SolverFailure& e) {
    run.flags.push_back(std::string("smallness diagnostic failed: ") + e.what());
  }
  run.diagnostics["smallness_iterates_checked"] = iterates;
  run.diagnostics["smallness_iterate_violations"] = violations;
  if (!before.small_data || !after.small_data) {
    run.flags.push_back(
        fmt::format("smallness violation: prefactor {:.6g} (start) / {:.6g} (final)",
                    before.prefactor, after.prefactor));
  }
  if (violations > 0) {
    run.flags.push_back(
        fmt::format("nu |v| <= |f| + sqrt(2E) failed at {} iterate(s)", violations));
  }
  if (m) {
    const Field d = difference(run.result.x, m->exact);
    run.error = p->ops().h() * norm2(d);
    run.diagnostics["l2_error"] = *run.error;
  }
  run.diagnostics["max_divergence"] = ns::max_divergence(p->ops(), run.result.x);

  run.binding.energy = [p](std::span<const double> u) { return ns::energy(*p, u); };
  run.binding.distance_sq = [p](std::span<const double> a, std::span<const double> b) {
    const Field d = difference(a, b);
    return p->ops().k_inner(d, d);
  };
  const double amp = c.coercivity.amplitude;
  run.binding.sample = [p, amp](std::mt19937_64& r) {
    return ns::random_div_free(p->ops(), r, amp);
  };
  return run;
}

FamilyRun dispatch(const ExperimentConfig& c, int grid, std::mt19937_64& rng) {
  switch (c.problem) {
    case Family::kOde:
      return run_ode(c, grid, rng);
    case Family::kElliptic:
      return run_elliptic(c, grid, rng);
    case Family::kWave:
      return run_wave(c, grid, rng);
    case Family::kNlWave:
      return run_nlwave(c, grid, rng);
    case Family::kNs:
      return run_ns(c, grid, rng);
  }
  throw std::logic_error("unhandled problem family");
}

}  // namespace

void to_json(json& j, const RunRecord& r) {
  j = {{"config", r.config},
       {"grid", r.grid},
       {"status", r.status},
       {"flags", r.flags},
       {"trace", r.trace},
       {"validation", r.validation},
       {"certificate", r.certificate},
       {"coercivity", r.coercivity ? json(*r.coercivity) : json(nullptr)},
       {"diagnostics", r.diagnostics},
       {"wall_clock_seconds", r.wall_clock_seconds},
       {"version", r.version}};
}

void from_json(const json& j, RunRecord& r) {
  r.config = j.at("config");
  j.at("grid").get_to(r.grid);
  j.at("status").get_to(r.status);
  j.at("flags").get_to(r.flags);
  j.at("trace").get_to(r.trace);
  j.at("validation").get_to(r.validation);
  j.at("certificate").get_to(r.certificate);
  if (j.at("coercivity").is_null()) {
    r.coercivity.reset();
  } else {
    r.coercivity = j.at("coercivity").get<CoercivityReport>();
  }
  r.diagnostics = j.at("diagnostics");
  j.at("wall_clock_seconds").get_to(r.wall_clock_seconds);
  j.at("version").get_to(r.version);
}

RunOutcome run_experiment(const ExperimentConfig& config, int grid) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(config.seed);
  FamilyRun run = dispatch(config, grid, rng);

  RunOutcome out;
  RunRecord& rec = out.record;
  rec.config = to_json(config);
  rec.grid = grid;
  rec.trace = run.result.trace;
  rec.diagnostics = std::move(run.diagnostics);
  rec.flags = std::move(run.flags);
  rec.version = VARERR_VERSION;
  out.h = run.h;
  out.error = run.error;

  if (!rec.trace.converged()) {
    std::string why = "not converged: " + to_string(rec.trace.termination);
    if (!rec.trace.message.empty()) why += " (" + rec.trace.message + ")";
    rec.flags.push_back(why);
  }
  if (!rec.trace.entries.empty()) {
    TraceThresholds th;
    th.tol_E = config.tol_E;
    th.grad_tol = config.grad_tol;
    rec.validation = validate_trace(rec.trace, th);
    for (const auto& msg : rec.validation.messages) {
      if (rec.validation.flagged) rec.flags.push_back("trace: " + msg);
    }
  } else {
    rec.validation.flagged = true;
    rec.validation.messages.push_back("empty trace");
  }

  const double final_e = rec.trace.final_energy();
  if (config.coercivity.enabled && !rec.trace.entries.empty()) {
    CoercivityOptions co;
    co.n_pairs = config.coercivity.pairs;
    co.sublevel_cap = config.coercivity.sublevel_cap;
    co.refine_steps = config.coercivity.refine_steps;
    co.seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
    run.binding.center = run.result.x;
    try {
      rec.coercivity = estimate_coercivity(run.binding, co);
      rec.certificate = make_certificate(final_e, *rec.coercivity, config.coercivity.safety);
    } catch (const SolverFailure& e) {
      rec.flags.push_back(std::string("coercivity estimation failed: ") + e.what());
      rec.certificate.energy = final_e;
    }
  } else {
    rec.certificate.energy = final_e;
  }

  rec.status = rec.flags.empty() ? "converged" : "flagged";
  rec.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_trace_csv(const fs::path& path, const DescentTrace& trace) {
  auto out = fmt::output_file(path.string());
  out.print("iteration,E,grad_norm,step\n");
  for (const TraceEntry& e : trace.entries) {
    out.print("{},{:.17g},{:.17g},{:.17g}\n", e.iteration, e.energy, e.grad_norm, e.step);
  }
}

void write_report(const fs::path& path, const RunRecord& record) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json(record).dump(2) << "\n";
}

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.out_dir) {
    if (o.out_dir->empty()) throw ConfigError("--out-dir", "output directory must not be empty");
    config.output_dir = *o.out_dir;
  }
  if (o.max_iter) {
    if (*o.max_iter < 1) throw ConfigError("--max-iter", "must be >= 1");
    config.max_iter = *o.max_iter;
  }
}

namespace {

std::optional<ExperimentConfig> load_for_command(const std::string& path, const Overrides& o) {
  try {
    ExperimentConfig c = load_config(path);
    apply_overrides(c, o);
    return c;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::nullopt;
  }
}

void log_outcome(const RunOutcome& out) {
  const RunRecord& r = out.record;
  spdlog::info("grid {}: {} after {} iterations, E = {:.3e}{}", r.grid, r.status,
               r.trace.iterations(), r.trace.final_energy(),
               out.error ? fmt::format(", error = {:.3e}", *out.error) : std::string());
  for (const auto& f : r.flags) spdlog::warn("grid {}: {}", r.grid, f);
}

}  // namespace

int run_command(const std::string& config_path, const Overrides& overrides) {
  const auto config = load_for_command(config_path, overrides);
  if (!config) return kExitUsage;
  if (config->grid.size() != 1) {
    std::cerr << "error: " << config_path << ": run takes a single grid; use 'varerr sweep' for a "
              << "ladder\n";
    return kExitUsage;
  }
  RunOutcome out;
  try {
    out = run_experiment(*config, config->grid.front());
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << config_path << ": " << e.what() << "\n";
    return kExitUsage;
  }
  const fs::path dir(config->output_dir);
  fs::create_directories(dir);
  write_trace_csv(dir / "trace.csv", out.record.trace);
  write_report(dir / "report.json", out.record);
  log_outcome(out);
  return out.record.status == "converged" ? kExitOk : kExitFlagged;
}

int sweep_command(const std::string& config_path, const Overrides& overrides) {
  const auto config = load_for_command(config_path, overrides);
  if (!config) return kExitUsage;
  if (config->grid.size() < 3) {
    std::cerr << "error: " << config_path << ": sweep needs a grid ladder of at least 3 entries\n";
    return kExitUsage;
  }
  // Ladder entries run one after another; each writes only its own
  // subdirectory and the coordinator writes convergence.csv at the end.
  std::vector<RunOutcome> outs;
  const fs::path dir(config->output_dir);
  for (int g : config->grid) {
    RunOutcome out;
    try {
      out = run_experiment(*config, g);
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << config_path << ": " << e.what() << "\n";
      return kExitUsage;
    }
    const fs::path sub = dir / fmt::format("grid_{}", g);
    fs::create_directories(sub);
    write_trace_csv(sub / "trace.csv", out.record.trace);
    write_report(sub / "report.json", out.record);
    log_outcome(out);
    outs.push_back(std::move(out));
  }

  auto csv = fmt::output_file((dir / "convergence.csv").string());
  csv.print("grid,h,error,observed_order,final_energy,iterations\n");
  bool all_ok = true;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const RunOutcome& o = outs[i];
    std::string err, order;
    if (o.error) err = fmt::format("{:.17g}", *o.error);
    if (i > 0 && o.error && outs[i - 1].error && *o.error > 0.0 && *outs[i - 1].error > 0.0) {
      const double p = std::log(*outs[i - 1].error / *o.error) / std::log(outs[i - 1].h / o.h);
      order = fmt::format("{:.17g}", p);
    }
    csv.print("{},{:.17g},{},{},{:.17g},{}\n", o.record.grid, o.h, err, order,
              o.record.trace.final_energy(), o.record.trace.iterations());
    all_ok = all_ok && o.record.trace.converged();
  }
  return all_ok ? kExitOk : kExitFlagged;
}

}  // namespace varerr::cli
