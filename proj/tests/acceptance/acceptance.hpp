#pragma once

#include <string>

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Runs one config per problem family twice through `run_command` with the
// same seed and compares the trace.csv bytes.
Outcome determinism();

}  // namespace acceptance
