#pragma once

#include <string>
#include <vector>

namespace bandlab {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Deterministic fast invariant suite (closed forms, solvers, densities; no
/// Monte Carlo). Backs the `check` subcommand and the first acceptance
/// criteria.
std::vector<CheckResult> run_invariant_suite();

}  // namespace bandlab
