#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bandlab/band_policy.hpp"
#include "bandlab/experiments.hpp"

namespace bandlab {

/// Configuration error naming the offending key and constraint.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full run configuration shared by every subcommand. Defaults describe the
/// reference experiment (mu=0.1, r=0.02, sigma=0.2, p=-3, T=1, z0=1).
struct RunConfig {
  MarketSpec spec;
  CostParams costs{1e-4, 0.0};

  struct Coeffs {  // direct (C, R) input for `bands`; 0 means "derive"
    double C = 0.0;
    double R = 0.0;
  } coeffs;

  struct Quartic {  // direct (B, a2, fz) input for `freeboundary`
    double B = 0.0;
    double a2 = 0.0;
    double fz = 0.0;
  } quartic;

  struct Policy {
    std::string mode = "asymptotic";  // asymptotic | numeric | fixed | search
    double gamma = 1.0;
    double beta = 1.0;
    double eta = 0.0;
    double theta = 0.0;
  } policy;

  struct Sim {
    double dt = 0.0;  // 0 = auto
    long paths = 10000;
    std::uint64_t seed = 20250810;
    double xi0 = 0.0;
    double burnin = -1.0;  // occupancy burn-in, years; <0 = auto
    long stride = 1;
    long dump_path = 0;
  } sim;

  struct Sweep {
    std::vector<double> epsilons{1e-2, 1e-3, 1e-4, 1e-5};
    double q = 0.75;
    double coupling_c = 0.0;
    long paths = 100000;
    long search_paths = 20000;
    bool full_2d = false;
  } sweep;

  struct Output {
    std::string csv;
    std::string json;
    std::string dump;
  } output;
};

/// One configurable knob: CLI flag, JSON pointer, and its constraint text.
struct OptionSpec {
  enum class Type { real, integer, text, boolean, real_list };
  const char* flag;
  const char* pointer;
  Type type;
  const char* help;
};

const std::vector<OptionSpec>& config_schema();

/// Parses and validates UTF-8 JSON; unknown keys are rejected and every
/// module invariant is re-checked. Throws ConfigError naming the key.
RunConfig parse_config(const std::string& text);

/// Validates an already-assembled JSON document (same rules).
RunConfig parse_config_json(const nlohmann::json& doc);

nlohmann::json to_json(const RunConfig& config);

/// Help text for a subcommand; lists every schema flag (doc-sync contract).
std::string cli_help(const std::string& subcommand);

/// Result of running a subcommand: exit status plus the stdout payload.
/// Artifacts (CSV/JSON files) are written as side effects.
struct DispatchResult {
  int exit_code = 0;
  std::string output;
};

/// Commands: merton, bands, freeboundary, simulate, sweep, density, check.
/// Exit codes: 0 ok, 1 usage/config, 2 numeric failure, 3 invariant failure.
DispatchResult dispatch(const std::string& command, const RunConfig& config);

}  // namespace bandlab
