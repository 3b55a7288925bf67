#include "varerr_cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace varerr::cli {

namespace {

std::string format_position(const std::string& source, int line, int column,
                            const std::string& message) {
  std::ostringstream os;
  os << source << ":" << line << ":" << column << ": " << message;
  return os.str();
}

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
    const YAML::Mark m = at.Mark();
    if (m.is_null()) throw ConfigError(source_, message);
    throw ConfigError(source_, m.line + 1, m.column + 1, message);
  }
  [[noreturn]] void fail(const YAML::Mark& m, const std::string& message) const {
    throw ConfigError(source_, m.line + 1, m.column + 1, message);
  }

  void require_map(const YAML::Node& n, const std::string& what) const {
    if (!n.IsMap()) fail(n, what + " must be a mapping");
  }

  void check_keys(const YAML::Node& n, const std::set<std::string>& allowed,
                  const std::string& context) const {
    require_map(n, context);
    for (auto it = n.begin(); it != n.end(); ++it) {
      const std::string key = it->first.as<std::string>();
      if (!allowed.count(key)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(it->first, "unknown key '" + key + "' in " + context + " (allowed: " + list + ")");
      }
    }
  }

  double real(const YAML::Node& n, const std::string& what) const {
    double v = 0.0;
    try {
      v = n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, what + " must be a number");
    }
    if (std::isnan(v)) fail(n, what + " must not be NaN");
    return v;
  }

  double positive(const YAML::Node& n, const std::string& what) const {
    const double v = real(n, what);
    if (!(v > 0.0)) fail(n, what + " must be > 0 (got " + n.as<std::string>() + ")");
    return v;
  }

  double finite(const YAML::Node& n, const std::string& what) const {
    const double v = real(n, what);
    if (!std::isfinite(v)) fail(n, what + " must be finite");
    return v;
  }

  long long integer(const YAML::Node& n, const std::string& what) const {
    try {
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      fail(n, what + " must be an integer");
    }
  }

  int int_at_least(const YAML::Node& n, const std::string& what, int lo) const {
    const long long v = integer(n, what);
    if (v < lo || v > 1'000'000'000) {
      fail(n, what + " must be an integer >= " + std::to_string(lo));
    }
    return static_cast<int>(v);
  }

  std::string text(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a string");
    return n.as<std::string>();
  }

  std::string choice(const YAML::Node& n, const std::string& what,
                     const std::set<std::string>& options) const {
    const std::string v = text(n, what);
    if (!options.count(v)) {
      std::string list;
      for (const auto& o : options) list += (list.empty() ? "" : "|") + o;
      fail(n, what + " must be one of " + list + " (got '" + v + "')");
    }
    return v;
  }

  bool boolean(const YAML::Node& n, const std::string& what) const {
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, what + " must be true or false");
    }
  }

 private:
  std::string source_;
};

int min_grid(Family f) {
  switch (f) {
    case Family::kOde:
      return 2;
    case Family::kElliptic:
      return 5;
    case Family::kWave:
    case Family::kNlWave:
      return 5;
    case Family::kNs:
      return 4;
  }
  return 2;
}

void read_params(const Reader& rd, const YAML::Node& n, ExperimentConfig& c) {
  switch (c.problem) {
    case Family::kOde: {
      rd.check_keys(n, {"field", "coefficient", "x0", "horizon"}, "params (ode)");
      if (n["field"]) {
        c.ode.field =
            rd.choice(n["field"], "params.field", {"linear", "sine", "arctan", "logistic"});
      }
      if (n["coefficient"]) c.ode.coefficient = rd.finite(n["coefficient"], "params.coefficient");
      if (n["horizon"]) {
        c.ode.horizon = rd.positive(n["horizon"], "params.horizon");
        if (!std::isfinite(c.ode.horizon)) rd.fail(n["horizon"], "params.horizon must be finite");
      }
      if (const YAML::Node x0 = n["x0"]) {
        c.ode.x0.clear();
        if (x0.IsSequence()) {
          if (x0.size() == 0) rd.fail(x0, "params.x0 must not be empty");
          for (const auto& v : x0) c.ode.x0.push_back(rd.finite(v, "params.x0 entry"));
        } else {
          c.ode.x0.push_back(rd.finite(x0, "params.x0"));
        }
      }
      break;
    }
    case Family::kElliptic: {
      rd.check_keys(n, {"flux", "amplitude"}, "params (elliptic)");
      if (n["flux"]) {
        c.elliptic.flux = rd.choice(n["flux"], "params.flux", {"identity", "arctan", "saturating"});
      }
      if (n["amplitude"]) c.elliptic.amplitude = rd.finite(n["amplitude"], "params.amplitude");
      break;
    }
    case Family::kWave: {
      rd.check_keys(
          n,
          {"forcing", "amplitude", "mode", "horizon", "length", "center_t", "center_x", "radius"},
          "params (wave)");
      if (n["forcing"]) {
        c.wave.forcing = rd.choice(n["forcing"], "params.forcing",
                                   {"zero", "manufactured", "separable", "bump"});
      }
      if (n["amplitude"]) c.wave.amplitude = rd.finite(n["amplitude"], "params.amplitude");
      if (n["mode"]) c.wave.mode = rd.int_at_least(n["mode"], "params.mode", 1);
      if (n["horizon"]) c.wave.horizon = rd.positive(n["horizon"], "params.horizon");
      if (n["length"]) c.wave.length = rd.positive(n["length"], "params.length");
      if (n["center_t"]) c.wave.center_t = rd.finite(n["center_t"], "params.center_t");
      if (n["center_x"]) c.wave.center_x = rd.finite(n["center_x"], "params.center_x");
      if (n["radius"]) c.wave.radius = rd.positive(n["radius"], "params.radius");
      break;
    }
    case Family::kNlWave: {
      rd.check_keys(n, {"nonlinearity", "alpha", "amplitude", "mode", "horizon", "length"},
                    "params (nlwave)");
      if (n["nonlinearity"]) {
        c.nlwave.nonlinearity = rd.choice(n["nonlinearity"], "params.nonlinearity",
                                          {"manufactured_arctan", "sine_ut", "arctan", "linear"});
      }
      if (n["alpha"]) c.nlwave.alpha = rd.finite(n["alpha"], "params.alpha");
      if (n["amplitude"]) c.nlwave.amplitude = rd.finite(n["amplitude"], "params.amplitude");
      if (n["mode"]) c.nlwave.mode = rd.int_at_least(n["mode"], "params.mode", 1);
      if (n["horizon"]) c.nlwave.horizon = rd.positive(n["horizon"], "params.horizon");
      if (n["length"]) c.nlwave.length = rd.positive(n["length"], "params.length");
      break;
    }
    case Family::kNs: {
      rd.check_keys(n, {"nu", "force", "amplitude"}, "params (ns)");
      if (n["nu"]) c.ns.nu = rd.positive(n["nu"], "params.nu");
      if (n["force"])
        c.ns.force = rd.choice(n["force"], "params.force", {"manufactured", "vortex"});
      if (n["amplitude"]) c.ns.amplitude = rd.finite(n["amplitude"], "params.amplitude");
      break;
    }
  }
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, int column,
                         const std::string& message)
    : std::runtime_error(format_position(source, line, column, message)),
      line_(line),
      column_(column) {}

ConfigError::ConfigError(const std::string& source, const std::string& message)
    : std::runtime_error(source + ": " + message) {}

std::string to_string(Family f) {
  switch (f) {
    case Family::kOde:
      return "ode";
    case Family::kElliptic:
      return "elliptic";
    case Family::kWave:
      return "wave";
    case Family::kNlWave:
      return "nlwave";
    case Family::kNs:
      return "ns";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "ode") return Family::kOde;
  if (s == "elliptic") return Family::kElliptic;
  if (s == "wave") return Family::kWave;
  if (s == "nlwave") return Family::kNlWave;
  if (s == "ns") return Family::kNs;
  throw std::invalid_argument("unknown problem family '" + s + "'");
}

Policy ExperimentConfig::effective_policy() const {
  if (policy) return *policy;
  return problem == Family::kNs ? Policy::kGradient : Policy::kNewton;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  const Reader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    rd.fail(e.mark, "YAML syntax error: " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError(source, "config must be a YAML mapping");
  rd.check_keys(root,
                {"problem", "grid", "seed", "output_dir", "initial", "params", "tolerances",
                 "descent", "coercivity"},
                "config");

  ExperimentConfig c;
  c.source = source;
  if (!root["problem"]) throw ConfigError(source, "missing required key 'problem'");
  {
    const YAML::Node n = root["problem"];
    c.problem =
        family_from_string(rd.choice(n, "problem", {"ode", "elliptic", "wave", "nlwave", "ns"}));
  }

  if (!root["grid"]) throw ConfigError(source, "missing required key 'grid'");
  {
    const YAML::Node n = root["grid"];
    const int lo = min_grid(c.problem);
    if (n.IsSequence()) {
      if (n.size() == 0) rd.fail(n, "grid ladder must not be empty");
      for (const auto& v : n) {
        const int g = rd.int_at_least(v, "grid entry", lo);
        if (!c.grid.empty() && g <= c.grid.back()) {
          rd.fail(v, "grid ladder must be strictly increasing");
        }
        c.grid.push_back(g);
      }
    } else {
      c.grid.push_back(rd.int_at_least(n, "grid", lo));
    }
  }

  if (const YAML::Node n = root["seed"]) {
    const long long s = rd.integer(n, "seed");
    if (s < 0) rd.fail(n, "seed must be >= 0");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (const YAML::Node n = root["output_dir"]) {
    c.output_dir = rd.text(n, "output_dir");
    if (c.output_dir.empty()) rd.fail(n, "output_dir must not be empty");
  }
  if (const YAML::Node n = root["initial"]) c.initial = rd.choice(n, "initial", {"zero", "random"});
  if (const YAML::Node n = root["params"]) {
    if (!n.IsNull()) read_params(rd, n, c);
  }

  if (const YAML::Node n = root["tolerances"]) {
    rd.check_keys(n, {"tol_E", "cg_tol", "grad_tol"}, "tolerances");
    if (n["tol_E"]) c.tol_E = rd.positive(n["tol_E"], "tolerances.tol_E");
    if (n["cg_tol"]) {
      c.cg_tol = rd.positive(n["cg_tol"], "tolerances.cg_tol");
      if (c.cg_tol >= 1.0) rd.fail(n["cg_tol"], "tolerances.cg_tol must be < 1");
    }
    if (n["grad_tol"]) c.grad_tol = rd.positive(n["grad_tol"], "tolerances.grad_tol");
  }

  if (const YAML::Node n = root["descent"]) {
    rd.check_keys(n, {"policy", "max_iter"}, "descent");
    if (const YAML::Node p = n["policy"]) {
      const std::string s = rd.choice(p, "descent.policy", {"newton", "gradient"});
      if (c.problem == Family::kWave) {
        rd.fail(p, "descent.policy does not apply to wave (solved by preconditioned CG)");
      }
      if (c.problem == Family::kNs && s == "newton") {
        rd.fail(p, "ns supports descent.policy gradient only");
      }
      c.policy = policy_from_string(s);
    }
    if (n["max_iter"]) c.max_iter = rd.int_at_least(n["max_iter"], "descent.max_iter", 1);
  }

  if (const YAML::Node n = root["coercivity"]) {
    rd.check_keys(n, {"enabled", "pairs", "safety", "refine_steps", "amplitude", "sublevel_cap"},
                  "coercivity");
    CoercivitySettings& cs = c.coercivity;
    if (n["enabled"]) cs.enabled = rd.boolean(n["enabled"], "coercivity.enabled");
    if (n["pairs"]) cs.pairs = rd.int_at_least(n["pairs"], "coercivity.pairs", 20);
    if (n["safety"]) {
      cs.safety = rd.real(n["safety"], "coercivity.safety");
      if (!(cs.safety >= 1.0) || !std::isfinite(cs.safety)) {
        rd.fail(n["safety"], "coercivity.safety must be a finite number >= 1");
      }
    }
    if (n["refine_steps"]) {
      cs.refine_steps = rd.int_at_least(n["refine_steps"], "coercivity.refine_steps", 0);
    }
    if (n["amplitude"]) cs.amplitude = rd.positive(n["amplitude"], "coercivity.amplitude");
    if (n["sublevel_cap"])
      cs.sublevel_cap = rd.positive(n["sublevel_cap"], "coercivity.sublevel_cap");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json params;
  switch (c.problem) {
    case Family::kOde:
      params = {{"field", c.ode.field},
                {"coefficient", c.ode.coefficient},
                {"x0", c.ode.x0},
                {"horizon", c.ode.horizon}};
      break;
    case Family::kElliptic:
      params = {{"flux", c.elliptic.flux}, {"amplitude", c.elliptic.amplitude}};
      break;
    case Family::kWave:
      params = {{"forcing", c.wave.forcing},
                {"amplitude", c.wave.amplitude},
                {"mode", c.wave.mode},
                {"horizon", c.wave.horizon},
                {"length", c.wave.length}};
      if (c.wave.forcing == "bump") {
        params["center_t"] = c.wave.center_t;
        params["center_x"] = c.wave.center_x;
        params["radius"] = c.wave.radius;
      }
      break;
    case Family::kNlWave:
      params = {{"nonlinearity", c.nlwave.nonlinearity}, {"alpha", c.nlwave.alpha},
                {"amplitude", c.nlwave.amplitude},       {"mode", c.nlwave.mode},
                {"horizon", c.nlwave.horizon},           {"length", c.nlwave.length}};
      break;
    case Family::kNs:
      params = {{"nu", c.ns.nu}, {"force", c.ns.force}, {"amplitude", c.ns.amplitude}};
      break;
  }
  const auto& cs = c.coercivity;
  json coercivity = {
      {"enabled", cs.enabled},
      {"pairs", cs.pairs},
      {"safety", cs.safety},
      {"refine_steps", cs.refine_steps},
      {"amplitude", cs.amplitude},
      {"sublevel_cap", std::isfinite(cs.sublevel_cap) ? json(cs.sublevel_cap) : json(nullptr)}};
  return {{"problem", to_string(c.problem)},
          {"grid", c.grid},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"initial", c.initial},
          {"params", params},
          {"tolerances", {{"tol_E", c.tol_E}, {"cg_tol", c.cg_tol}, {"grad_tol", c.grad_tol}}},
          {"descent",
           {{"policy",
             c.problem == Family::kWave ? std::string("cg") : to_string(c.effective_policy())},
            {"max_iter", c.max_iter}}},
          {"coercivity", coercivity}};
}

}  // namespace varerr::cli
