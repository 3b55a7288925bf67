#include "varerr/certify.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace varerr {

CoercivityReport estimate_coercivity(const CoercivityBinding& binding,
                                     const CoercivityOptions& options) {
  if (options.n_pairs < 20) throw std::invalid_argument("estimate_coercivity: need >= 20 pairs");
  if (options.refine_steps < 0) {
    throw std::invalid_argument("estimate_coercivity: refine_steps must be >= 0");
  }
  if (!binding.energy || !binding.distance_sq || !binding.sample) {
    throw std::invalid_argument("estimate_coercivity: incomplete binding");
  }
  std::mt19937_64 rng(options.seed);
  CoercivityReport report;
  report.sublevel_cap = options.sublevel_cap;

  auto offset = [&](const Field& d) {
    if (binding.center.empty()) return d;
    if (binding.center.size() != d.size()) throw ShapeError("estimate_coercivity: center size");
    Field out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = binding.center[i] + d[i];
    return out;
  };
  // Pair (center + d1, center + d2); NaN when the pair must be skipped.
  auto ratio_of = [&](const Field& d1, const Field& d2) {
    const Field u = offset(d1), v = offset(d2);
    const double eu = binding.energy(u);
    const double ev = binding.energy(v);
    const double denom = eu + ev;
    if (!(denom > 0.0) || eu > options.sublevel_cap || ev > options.sublevel_cap) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return binding.distance_sq(u, v) / denom;
  };
  auto negate = [](const Field& d) {
    Field out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = -d[i];
    return out;
  };

  Field best1, best2;
  int best_kind = 0;
  for (int k = 0; k < options.n_pairs; ++k) {
    Field d1 = binding.sample(rng);
    Field d2;
    switch (k % 3) {
      case 0:
        d2 = binding.sample(rng);
        break;
      case 1:
        d2 = negate(d1);
        break;
      default:
        d2.assign(d1.size(), 0.0);
        break;
    }
    const double ratio = ratio_of(d1, d2);
    if (std::isnan(ratio)) {
      ++report.skipped;
      continue;
    }
    ++report.sample_count;
    if (ratio > report.max_ratio || report.argmax_pair < 0) {
      report.max_ratio = ratio;
      report.argmax_pair = k;
      best_kind = k % 3;
      best1 = std::move(d1);
      best2 = std::move(d2);
    }
  }
  static const char* const kKinds[] = {"independent", "opposite", "center"};
  if (report.argmax_pair < 0) return report;
  report.argmax_kind = kKinds[best_kind];

  // Random-direction hill climbing from the worst pair, keeping its kind.
  auto size_of = [&](const Field& d) {
    return std::sqrt(std::max(0.0, binding.distance_sq(offset(d), offset(Field(d.size(), 0.0)))));
  };
  double sigma = 0.5;
  for (int s = 0; s < options.refine_steps; ++s) {
    const Field e1 = binding.sample(rng);
    const double n1 = size_of(e1);
    if (!(n1 > 0.0)) continue;
    const double scale1 = sigma * size_of(best1) / n1;
    Field c1(best1), c2;
    for (std::size_t i = 0; i < c1.size(); ++i) c1[i] += scale1 * e1[i];
    if (best_kind == 0) {
      const Field e2 = binding.sample(rng);
      const double n2 = size_of(e2);
      c2 = best2;
      if (n2 > 0.0) {
        const double scale2 = sigma * size_of(best2) / n2;
        for (std::size_t i = 0; i < c2.size(); ++i) c2[i] += scale2 * e2[i];
      }
    } else if (best_kind == 1) {
      c2 = negate(c1);
    } else {
      c2.assign(c1.size(), 0.0);
    }
    const double ratio = ratio_of(c1, c2);
    if (!std::isnan(ratio) && ratio > report.max_ratio) {
      report.max_ratio = ratio;
      ++report.refine_accepted;
      best1 = std::move(c1);
      best2 = std::move(c2);
      sigma = std::min(1.0, sigma * 1.5);
    } else {
      sigma = std::max(1e-3, sigma * 0.8);
    }
  }
  return report;
}

ErrorCertificate make_certificate(double energy, const CoercivityReport& coercivity,
                                  double safety) {
  if (!(safety >= 1.0)) throw std::invalid_argument("certificate safety factor must be >= 1");
  ErrorCertificate c;
  c.energy = energy;
  c.c_emp = safety * coercivity.max_ratio;
  c.bound = c.c_emp * energy;
  c.local_regime = std::isfinite(coercivity.sublevel_cap) && energy <= coercivity.sublevel_cap;
  c.sample_size = coercivity.sample_count;
  return c;
}

TraceValidation validate_trace(const DescentTrace& trace, const TraceThresholds& thresholds) {
  if (trace.entries.empty()) throw std::invalid_argument("validate_trace: empty trace");
  TraceValidation v;
  const auto& e = trace.entries;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!std::isfinite(e[i].energy) || !std::isfinite(e[i].grad_norm) ||
        !std::isfinite(e[i].step)) {
      v.finite = false;
    }
    if (i > 0 && e[i].energy > e[i - 1].energy) v.monotone = false;
  }
  if (!v.finite) v.messages.emplace_back("non-finite values in trace");
  if (!v.monotone) v.messages.emplace_back("energy increased between accepted iterates");

  v.energy_ok = e.back().energy <= thresholds.tol_E;
  v.gradient_ok = e.back().grad_norm <= thresholds.grad_tol;
  if (v.gradient_ok && !v.energy_ok) {
    v.gradient_small_energy_large = true;
    v.messages.emplace_back("gradient small but energy large");
  }
  if (!v.energy_ok) v.messages.emplace_back("final energy above tolerance");
  if (!v.gradient_ok) v.messages.emplace_back("final gradient norm above threshold");

  std::vector<double> xs, ys;
  for (const auto& entry : e) {
    if (entry.energy > 0.0 && entry.grad_norm > 0.0) {
      xs.push_back(std::log(entry.grad_norm));
      ys.push_back(std::log(entry.energy));
    }
  }
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx > 0.0 && syy > 0.0) v.correlation = sxy / std::sqrt(sxx * syy);
  }
  v.flagged = !v.finite || !v.monotone || !v.energy_ok || !v.gradient_ok;
  return v;
}

namespace {

// Infinite caps are stored as null so the document stays valid JSON.
nlohmann::json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

double number_or_inf(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const TraceEntry& e) {
  j = {{"iteration", e.iteration},
       {"energy", e.energy},
       {"grad_norm", e.grad_norm},
       {"step", e.step},
       {"inner_iterations", e.inner_iterations}};
}

void from_json(const nlohmann::json& j, TraceEntry& e) {
  j.at("iteration").get_to(e.iteration);
  j.at("energy").get_to(e.energy);
  j.at("grad_norm").get_to(e.grad_norm);
  j.at("step").get_to(e.step);
  j.at("inner_iterations").get_to(e.inner_iterations);
}

void to_json(nlohmann::json& j, const DescentTrace& t) {
  j = {{"entries", t.entries}, {"termination", to_string(t.termination)}, {"message", t.message}};
}

void from_json(const nlohmann::json& j, DescentTrace& t) {
  j.at("entries").get_to(t.entries);
  t.termination = termination_from_string(j.at("termination").get<std::string>());
  j.at("message").get_to(t.message);
}

void to_json(nlohmann::json& j, const CoercivityReport& r) {
  j = {{"sample_count", r.sample_count},
       {"skipped", r.skipped},
       {"max_ratio", r.max_ratio},
       {"argmax_pair", r.argmax_pair},
       {"argmax_kind", r.argmax_kind},
       {"refine_accepted", r.refine_accepted},
       {"sublevel_cap", number_or_null(r.sublevel_cap)}};
}

void from_json(const nlohmann::json& j, CoercivityReport& r) {
  j.at("sample_count").get_to(r.sample_count);
  j.at("skipped").get_to(r.skipped);
  j.at("max_ratio").get_to(r.max_ratio);
  j.at("argmax_pair").get_to(r.argmax_pair);
  j.at("argmax_kind").get_to(r.argmax_kind);
  j.at("refine_accepted").get_to(r.refine_accepted);
  r.sublevel_cap = number_or_inf(j.at("sublevel_cap"));
}

void to_json(nlohmann::json& j, const ErrorCertificate& c) {
  j = {{"energy", c.energy},
       {"c_emp", c.c_emp},
       {"bound", c.bound},
       {"local_regime", c.local_regime},
       {"sample_size", c.sample_size}};
}

void from_json(const nlohmann::json& j, ErrorCertificate& c) {
  j.at("energy").get_to(c.energy);
  j.at("c_emp").get_to(c.c_emp);
  j.at("bound").get_to(c.bound);
  j.at("local_regime").get_to(c.local_regime);
  j.at("sample_size").get_to(c.sample_size);
}

void to_json(nlohmann::json& j, const TraceValidation& v) {
  j = {{"finite", v.finite},
       {"monotone", v.monotone},
       {"energy_ok", v.energy_ok},
       {"gradient_ok", v.gradient_ok},
       {"gradient_small_energy_large", v.gradient_small_energy_large},
       {"correlation", v.correlation},
       {"flagged", v.flagged},
       {"messages", v.messages}};
}

void from_json(const nlohmann::json& j, TraceValidation& v) {
  j.at("finite").get_to(v.finite);
  j.at("monotone").get_to(v.monotone);
  j.at("energy_ok").get_to(v.energy_ok);
  j.at("gradient_ok").get_to(v.gradient_ok);
  j.at("gradient_small_energy_large").get_to(v.gradient_small_energy_large);
  j.at("correlation").get_to(v.correlation);
  j.at("flagged").get_to(v.flagged);
  j.at("messages").get_to(v.messages);
}

}  // namespace varerr
