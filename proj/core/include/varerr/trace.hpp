#pragma once

#include <string>
#include <vector>

namespace varerr {

enum class Termination {
  kConverged,  // E <= tol_E
  kMaxIterations,
  kLineSearchFailed,  // step fell below the minimum without sufficient decrease
  kSolverFailed,      // an inner linear solve or direction computation failed
};

std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct TraceEntry {
  int iteration = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;         // 0 for the initial entry
  int inner_iterations = 0;  // linear-solver iterations spent on this iterate

  bool operator==(const TraceEntry&) const = default;
};

/// Per-iteration record of a descent run; entry 0 is the starting point.
struct DescentTrace {
  std::vector<TraceEntry> entries;
  Termination termination = Termination::kMaxIterations;
  std::string message;

  [[nodiscard]] int iterations() const {
    return entries.empty() ? 0 : static_cast<int>(entries.size()) - 1;
  }
  [[nodiscard]] double final_energy() const {
    return entries.empty() ? 0.0 : entries.back().energy;
  }
  [[nodiscard]] bool converged() const { return termination == Termination::kConverged; }

  bool operator==(const DescentTrace&) const = default;
};

}  // namespace varerr
