#include <gtest/gtest.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "varerr_cli/config.hpp"
#include "varerr_cli/runner.hpp"

namespace varerr::cli {
namespace {

namespace fs = std::filesystem;

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    spdlog::set_level(spdlog::level::off);
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("varerr_cli_") + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    fs::remove_all(dir_);
    spdlog::set_level(spdlog::level::info);
  }

  // Writes a config whose output_dir points inside the work directory.
  std::string config(const std::string& name, const std::string& body) {
    const fs::path path = dir_ / (name + ".yaml");
    std::ofstream(path) << body << "output_dir: " << (dir_ / name).string() << "\n";
    return path.string();
  }
  fs::path out(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

Overrides with_max_iter(int n) {
  Overrides o;
  o.max_iter = n;
  return o;
}

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

TEST(Config, MinimalDocumentTakesDefaults) {
  const ExperimentConfig c = parse_config("problem: ode\ngrid: 50\n");
  EXPECT_EQ(c.problem, Family::kOde);
  EXPECT_EQ(c.grid, std::vector<int>{50});
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.output_dir, "out");
  EXPECT_EQ(c.initial, "zero");
  EXPECT_EQ(c.tol_E, 1e-10);
  EXPECT_EQ(c.grad_tol, 1e-4);
  EXPECT_EQ(c.max_iter, 100);
  EXPECT_FALSE(c.policy.has_value());
  EXPECT_EQ(c.coercivity.pairs, 50);
  EXPECT_EQ(c.coercivity.safety, 1.5);
  EXPECT_TRUE(std::isinf(c.coercivity.sublevel_cap));
}

TEST(Config, JsonEchoIncludesDefaults) {
  const nlohmann::json j = to_json(parse_config("problem: ns\ngrid: 8\n"));
  EXPECT_EQ(j["problem"], "ns");
  EXPECT_EQ(j["params"]["nu"], 1.0);
  EXPECT_EQ(j["tolerances"]["tol_E"], 1e-10);
  EXPECT_EQ(j["tolerances"]["grad_tol"], 1e-4);
  EXPECT_EQ(j["descent"]["policy"], "gradient");
  EXPECT_EQ(j["coercivity"]["pairs"], 50);
  EXPECT_TRUE(j["coercivity"]["sublevel_cap"].is_null());
  EXPECT_EQ(to_json(parse_config("problem: wave\ngrid: 9\n"))["descent"]["policy"], "cg");
}

TEST(Config, FullDocumentIsRead) {
  const ExperimentConfig c = parse_config(
      "problem: nlwave\n"
      "grid: [9, 17, 33]\n"
      "seed: 5\n"
      "initial: random\n"
      "params: {nonlinearity: sine_ut, alpha: 0.25}\n"
      "tolerances: {tol_E: 1.0e-14, grad_tol: 1.0e-6}\n"
      "descent: {policy: gradient, max_iter: 7}\n"
      "coercivity: {enabled: false, pairs: 30, sublevel_cap: 2.0}\n");
  EXPECT_EQ(c.grid, (std::vector<int>{9, 17, 33}));
  EXPECT_EQ(c.nlwave.nonlinearity, "sine_ut");
  EXPECT_EQ(c.nlwave.alpha, 0.25);
  EXPECT_EQ(c.tol_E, 1e-14);
  EXPECT_EQ(c.effective_policy(), Policy::kGradient);
  EXPECT_EQ(c.max_iter, 7);
  EXPECT_FALSE(c.coercivity.enabled);
  EXPECT_EQ(c.coercivity.sublevel_cap, 2.0);
}

TEST(Config, UnknownKeyReportsItsLine) {
  EXPECT_EQ(error_line("problem: ode\ngrid: 10\ntolerances:\n  tol_E: 1.0e-8\n  tolE: 3\n"), 5);
  EXPECT_EQ(error_line("problem: ode\ngrid: 10\nsede: 3\n"), 3);
  try {
    parse_config("problem: ode\ngrid: 10\nsede: 3\n", "x.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("sede"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("x.yaml"), std::string::npos);
  }
}

TEST(Config, RejectsInvalidValues) {
  EXPECT_EQ(error_line("problem: ode\ngrid: 10\ntolerances: {tol_E: -1}\n"), 3);
  EXPECT_EQ(error_line("problem: wave\ngrid: [33, 17, 65]\n"), 2);
  EXPECT_EQ(error_line("problem: wave\ngrid: [17, 17, 33]\n"), 2);
  EXPECT_EQ(error_line("problem: heat\ngrid: 10\n"), 1);
  EXPECT_EQ(error_line("problem: ode\ngrid: 10\nseed: -3\n"), 3);
  EXPECT_EQ(error_line("problem: ode\ngrid: 10\ndescent: {max_iter: 0}\n"), 3);
  EXPECT_EQ(error_line("problem: ode\ngrid: 10\ncoercivity: {pairs: 10}\n"), 3);
  EXPECT_EQ(error_line("problem: ode\ngrid: 10\ncoercivity: {safety: 0.5}\n"), 3);
  EXPECT_EQ(error_line("problem: ode\ngrid: 10\ntolerances: {cg_tol: 2}\n"), 3);
  EXPECT_THROW(parse_config("grid: 10\n"), ConfigError);
  EXPECT_THROW(parse_config("problem: ode\n"), ConfigError);
  EXPECT_THROW(parse_config("- a\n- b\n"), ConfigError);
  EXPECT_GT(error_line("problem: ode\ngrid: [10, 20\n"), 0);
}

TEST(Config, PolicyRules) {
  EXPECT_EQ(error_line("problem: wave\ngrid: 9\ndescent: {policy: newton}\n"), 3);
  EXPECT_EQ(error_line("problem: ns\ngrid: 8\ndescent:\n  policy: newton\n"), 4);
  EXPECT_EQ(parse_config("problem: ns\ngrid: 8\ndescent: {policy: gradient}\n").effective_policy(),
            Policy::kGradient);
  EXPECT_EQ(parse_config("problem: ode\ngrid: 8\n").effective_policy(), Policy::kNewton);
}

TEST(Overrides, AppliedAndValidated) {
  ExperimentConfig c = parse_config("problem: ode\ngrid: 10\n");
  Overrides o = with_max_iter(3);
  o.seed = 9;
  o.out_dir = "elsewhere";
  apply_overrides(c, o);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.output_dir, "elsewhere");
  EXPECT_EQ(c.max_iter, 3);
  EXPECT_THROW(apply_overrides(c, with_max_iter(0)), ConfigError);
  Overrides empty_dir;
  empty_dir.out_dir = "";
  EXPECT_THROW(apply_overrides(c, empty_dir), ConfigError);
  apply_overrides(c, {});
  EXPECT_EQ(c.max_iter, 3);
}

TEST(RunRecord, JsonRoundTrip) {
  ExperimentConfig c =
      parse_config("problem: ode\ngrid: 40\nseed: 3\ncoercivity: {pairs: 20, refine_steps: 10}\n");
  const RunOutcome out = run_experiment(c, 40);
  ASSERT_TRUE(out.record.coercivity.has_value());
  const nlohmann::json j = out.record;
  EXPECT_EQ(j.get<RunRecord>(), out.record);
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<RunRecord>(), out.record);
}

TEST_F(Workdir, RunWritesTraceAndReport) {
  const std::string cfg = config("ode",
                                 "problem: ode\ngrid: 100\nseed: 1\n"
                                 "params: {field: sine, coefficient: 1.0, x0: 0.5}\n"
                                 "coercivity: {pairs: 20, refine_steps: 20}\n");
  ASSERT_EQ(run_command(cfg, {}), kExitOk);
  const auto rows = read_csv(out("ode") / "trace.csv");
  ASSERT_GE(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"iteration", "E", "grad_norm", "step"}));
  for (std::size_t k = 2; k < rows.size(); ++k) {
    EXPECT_LT(std::stod(rows[k][1]), std::stod(rows[k - 1][1])) << k;
  }
  const nlohmann::json report = read_json(out("ode") / "report.json");
  EXPECT_EQ(report["status"], "converged");
  EXPECT_EQ(report["grid"], 100);
  EXPECT_EQ(report["config"]["seed"], 1);
  EXPECT_GT(report["certificate"]["c_emp"].get<double>(), 0.0);
}

TEST_F(Workdir, OverridesRedirectOutput) {
  const std::string cfg = config("ode", "problem: ode\ngrid: 50\ncoercivity: {enabled: false}\n");
  const fs::path other = out("other");
  Overrides o;
  o.seed = 4;
  o.out_dir = other.string();
  ASSERT_EQ(run_command(cfg, o), kExitOk);
  EXPECT_FALSE(fs::exists(out("ode")));
  EXPECT_EQ(read_json(other / "report.json")["config"]["seed"], 4);
}

TEST_F(Workdir, InvalidConfigWritesNothing) {
  const std::string cfg = config("bad", "problem: ode\ngrid: 50\ntolerances: {tol_E: -1}\n");
  EXPECT_EQ(run_command(cfg, {}), kExitUsage);
  EXPECT_FALSE(fs::exists(out("bad")));
  EXPECT_EQ(run_command((dir_ / "missing.yaml").string(), {}), kExitUsage);
  const std::string ok = config("ok", "problem: ode\ngrid: 50\n");
  EXPECT_EQ(run_command(ok, with_max_iter(0)), kExitUsage);
  EXPECT_FALSE(fs::exists(out("ok")));
}

TEST_F(Workdir, RunRejectsLadder) {
  const std::string cfg = config("ladder", "problem: ode\ngrid: [10, 20, 40]\n");
  EXPECT_EQ(run_command(cfg, {}), kExitUsage);
  EXPECT_FALSE(fs::exists(out("ladder")));
}

TEST_F(Workdir, LowViscosityNavierStokesIsFlagged) {
  const std::string cfg = config("ns",
                                 "problem: ns\ngrid: 16\nseed: 3\n"
                                 "params: {nu: 0.005, force: manufactured, amplitude: 0.25}\n"
                                 "descent: {max_iter: 30}\n"
                                 "coercivity: {enabled: false}\n");
  ASSERT_EQ(run_command(cfg, {}), kExitFlagged);
  const nlohmann::json report = read_json(out("ns") / "report.json");
  EXPECT_EQ(report["status"], "flagged");
  bool smallness = false;
  for (const auto& f : report["flags"]) {
    smallness = smallness || f.get<std::string>().find("smallness") != std::string::npos;
  }
  EXPECT_TRUE(smallness);
}

TEST_F(Workdir, WaveSweepObservesSecondOrder) {
  const std::string cfg = config("wave",
                                 "problem: wave\ngrid: [17, 33, 65]\n"
                                 "tolerances: {tol_E: 1.0e-22}\n"
                                 "descent: {max_iter: 2000}\n"
                                 "coercivity: {enabled: false}\n");
  ASSERT_EQ(sweep_command(cfg, {}), kExitOk);
  const auto rows = read_csv(out("wave") / "convergence.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"grid", "h", "error", "observed_order",
                                               "final_energy", "iterations"}));
  EXPECT_EQ(rows[1][3], "");
  for (std::size_t k = 2; k < rows.size(); ++k) EXPECT_NEAR(std::stod(rows[k][3]), 2.0, 0.3);
  for (int g : {17, 33, 65}) {
    EXPECT_TRUE(fs::exists(out("wave") / ("grid_" + std::to_string(g)) / "trace.csv"));
    EXPECT_TRUE(fs::exists(out("wave") / ("grid_" + std::to_string(g)) / "report.json"));
  }
}

TEST_F(Workdir, OdeSweepObservesSecondOrder) {
  const std::string cfg = config("ode",
                                 "problem: ode\ngrid: [50, 100, 200]\n"
                                 "tolerances: {tol_E: 1.0e-22}\n"
                                 "coercivity: {enabled: false}\n");
  ASSERT_EQ(sweep_command(cfg, {}), kExitOk);
  const auto rows = read_csv(out("ode") / "convergence.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 2; k < rows.size(); ++k) EXPECT_NEAR(std::stod(rows[k][3]), 2.0, 0.05);
}

TEST_F(Workdir, SweepNeedsALadder) {
  EXPECT_EQ(sweep_command(config("one", "problem: wave\ngrid: 17\n"), {}), kExitUsage);
  EXPECT_EQ(sweep_command(config("two", "problem: wave\ngrid: [17, 33]\n"), {}), kExitUsage);
  EXPECT_FALSE(fs::exists(out("one")));
  EXPECT_FALSE(fs::exists(out("two")));
}

}  // namespace
}  // namespace varerr::cli
