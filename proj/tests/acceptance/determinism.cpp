#include <fmt/core.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "varerr_cli/runner.hpp"

namespace acceptance {
namespace {

namespace fs = std::filesystem;

struct Case {
  const char* name;
  const char* yaml;
};

// Small grids, random starting fields and coercivity sampling switched on so
// every seeded code path feeds the trace or the report.
const Case kCases[] = {
    {"ode", R"(problem: ode
grid: 64
seed: 17
initial: random
params: {field: logistic, coefficient: 1.5, x0: [0.3], horizon: 1.0}
descent: {policy: gradient, max_iter: 40}
coercivity: {pairs: 20, refine_steps: 50}
)"},
    {"elliptic", R"(problem: elliptic
grid: 17
seed: 17
initial: random
params: {flux: arctan}
descent: {policy: newton, max_iter: 20}
coercivity: {pairs: 20, refine_steps: 50}
)"},
    {"wave", R"(problem: wave
grid: 17
seed: 17
initial: random
params: {forcing: bump}
descent: {max_iter: 200}
coercivity: {pairs: 20, refine_steps: 50}
)"},
    {"nlwave", R"(problem: nlwave
grid: 17
seed: 17
initial: random
params: {nonlinearity: sine_ut, alpha: 0.5}
descent: {policy: gradient, max_iter: 30}
coercivity: {pairs: 20, refine_steps: 50}
)"},
    {"ns", R"(problem: ns
grid: 12
seed: 17
initial: random
params: {nu: 1.0, force: vortex}
descent: {max_iter: 30}
coercivity: {pairs: 20, refine_steps: 50}
)"},
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Outcome determinism() {
  // The runner logs through the default logger; keep the PASS/FAIL lines clean.
  const auto previous = spdlog::get_level();
  spdlog::set_level(spdlog::level::off);

  const fs::path root =
      fs::temp_directory_path() / fmt::format("varerr_determinism_{}", ::getpid());
  fs::remove_all(root);
  fs::create_directories(root);

  int identical = 0;
  std::vector<std::string> problems;
  for (const Case& c : kCases) {
    const fs::path config = root / (std::string(c.name) + ".yaml");
    std::ofstream(config) << c.yaml;
    std::string traces[2];
    for (int rep = 0; rep < 2; ++rep) {
      varerr::cli::Overrides o;
      o.out_dir = (root / fmt::format("{}_{}", c.name, rep)).string();
      const int status = varerr::cli::run_command(config.string(), o);
      if (status == varerr::cli::kExitUsage) {
        problems.push_back(fmt::format("{}: exit {}", c.name, status));
        break;
      }
      traces[rep] = slurp(fs::path(*o.out_dir) / "trace.csv");
    }
    if (!traces[0].empty() && traces[0] == traces[1]) {
      ++identical;
    } else {
      problems.push_back(fmt::format("{}: trace.csv differs", c.name));
    }
  }

  fs::remove_all(root);
  spdlog::set_level(previous);

  std::ostringstream detail;
  detail << fmt::format("{}/{} families reproduced trace.csv byte-identically", identical,
                        std::size(kCases));
  for (const auto& p : problems) detail << "; " << p;
  return {identical == static_cast<int>(std::size(kCases)), detail.str()};
}

}  // namespace acceptance
