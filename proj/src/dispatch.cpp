#include <cmath>
#include <fstream>
#include <stdexcept>

#include "bandlab/checks.hpp"
#include "bandlab/config.hpp"
#include "bandlab/expansion.hpp"
#include "bandlab/experiments.hpp"

namespace bandlab {

using nlohmann::json;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

std::string error_json(const std::string& message) {
  json doc;
  doc["error"] = message;
  return doc.dump(2) + "\n";
}

CostCoefficients resolve_coeffs(const RunConfig& cfg, const MertonSolution& sol) {
  if (cfg.coeffs.C < 0 && cfg.coeffs.R < 0) {
    CostCoefficients coeffs;
    coeffs.C = cfg.coeffs.C;
    coeffs.R = cfg.coeffs.R;
    return coeffs;
  }
  return CostCoefficients::from_merton(sol, cfg.spec.z0, 0.0);
}

PolicyMode sweep_mode(const std::string& mode) {
  if (mode == "asymptotic") return PolicyMode::asymptotic;
  if (mode == "numeric") return PolicyMode::numeric_optimal;
  if (mode == "search") return PolicyMode::simulation_search;
  throw std::invalid_argument("policy.mode: sweep needs asymptotic | numeric | search");
}

BandSource resolve_band_source(const RunConfig& cfg) {
  if (cfg.policy.mode == "fixed")
    return BandSource::fixed_policy(BandPolicy{cfg.policy.gamma, cfg.policy.beta,
                                               cfg.policy.eta, cfg.policy.theta});
  if (cfg.policy.mode == "search")
    throw std::invalid_argument(
        "policy.mode: search only applies to the sweep subcommand");
  if (cfg.policy.mode == "asymptotic" && cfg.costs.lambda != 0.0) {
    const double balanced = std::pow(cfg.costs.epsilon, 0.75);
    if (std::abs(cfg.costs.lambda - balanced) > 1e-9 * balanced)
      throw std::invalid_argument(
          "policy.mode: asymptotic bands need lambda = 0 or lambda = "
          "epsilon^{3/4}; use numeric");
  }
  return BandSource::merton_scaled();
}

SimConfig build_sim_config(const RunConfig& cfg) {
  const MertonSolution sol = cfg.spec.merton();
  const BandSource source = resolve_band_source(cfg);
  double dt = cfg.sim.dt;
  if (dt == 0.0) {
    double gamma0;
    if (cfg.policy.mode == "fixed") {
      gamma0 = std::min(cfg.policy.gamma, cfg.policy.beta);
    } else {
      const auto opt = optimize_bands(
          CostCoefficients::from_merton(sol, cfg.spec.z0, 0.0), cfg.costs);
      gamma0 = opt.gamma;
    }
    dt = auto_time_step(sol, cfg.spec.z0, gamma0, 0.0);
  }
  SimConfig sim(sol, cfg.costs, source, dt, cfg.sim.paths, cfg.sim.seed,
                cfg.spec.z0);
  sim.xi0 = cfg.sim.xi0;
  return sim;
}

std::string run_merton(const RunConfig& cfg) {
  const MertonSolution sol = cfg.spec.merton();
  const double z = cfg.spec.z0;
  json doc;
  doc["rho"] = sol.rho();
  doc["f0"] = sol.value(z, 0.0);
  doc["f0_z"] = sol.value_z(z, 0.0);
  doc["f0_zz"] = sol.value_zz(z, 0.0);
  doc["m"] = sol.merton_ratio(z);
  doc["m_z"] = sol.merton_ratio_slope();
  doc["a"] = sol.noise_coefficient(z);
  return doc.dump(2) + "\n";
}

std::string run_bands(const RunConfig& cfg) {
  const MertonSolution sol = cfg.spec.merton();
  const CostCoefficients coeffs = resolve_coeffs(cfg, sol);
  const BandOptimum numeric = optimize_bands(coeffs, cfg.costs);
  json doc;
  doc["C"] = coeffs.C;
  doc["R"] = coeffs.R;
  doc["epsilon"] = cfg.costs.epsilon;
  doc["lambda"] = cfg.costs.lambda;
  doc["gamma"] = numeric.gamma;
  doc["eta"] = numeric.eta;
  json num;
  num["m"] = numeric.m_sum;
  num["n"] = numeric.n_diff;
  num["gamma"] = numeric.gamma;
  num["eta"] = numeric.eta;
  num["value"] = numeric.value;
  num["foc_m"] = numeric.foc[0];
  num["foc_n"] = numeric.foc[1];
  num["boundary_limit"] = numeric.boundary_limit;
  doc["numeric"] = num;
  if (cfg.costs.epsilon > 0) {
    const BalanceSolution balance = asymptotic_bands(cfg.costs.epsilon, coeffs);
    json asym;
    asym["omega"] = balance.omega;
    asym["m"] = balance.m_sum;
    asym["n"] = balance.n_diff;
    asym["gamma"] = balance.gamma;
    asym["eta"] = balance.eta;
    asym["balanced_lambda"] = std::pow(cfg.costs.epsilon, 0.75);
    doc["asymptotic"] = asym;
  }
  return doc.dump(2) + "\n";
}

std::string run_freeboundary(const RunConfig& cfg) {
  double B = cfg.quartic.B, a2 = cfg.quartic.a2, fz = cfg.quartic.fz;
  if (a2 == 0.0) {
    const MertonSolution sol = cfg.spec.merton();
    const double sigma = sol.market().sigma;
    const double a = sol.noise_coefficient(cfg.spec.z0);
    B = 0.5 * sigma * sigma * sol.value_zz(cfg.spec.z0, 0.0);
    a2 = a * a;
    fz = sol.value_z(cfg.spec.z0, 0.0);
  }
  const FreeBoundarySolution sol = solve_free_boundary(B, a2, fz);
  json doc;
  doc["B"] = B;
  doc["a2"] = a2;
  doc["fz"] = fz;
  doc["gamma"] = sol.gamma;
  doc["beta"] = sol.beta;
  doc["eta"] = sol.eta;
  doc["theta"] = sol.theta;
  doc["c1"] = sol.c1;
  doc["K"] = sol.K;
  doc["residual_norm"] = sol.residual_norm;
  doc["iterations"] = sol.iterations;
  return doc.dump(2) + "\n";
}

std::string run_simulate(const RunConfig& cfg) {
  SimConfig sim = build_sim_config(cfg);
  const auto records = simulate_all(sim);
  MeanVar utility, terminal;
  long trades = 0, bankrupt = 0;
  double costs_total = 0.0;
  for (const auto& rec : records) {
    utility.add(rec.utility);
    terminal.add(rec.terminal_z);
    trades += rec.n_trades;
    bankrupt += rec.bankrupt ? 1 : 0;
    costs_total += rec.total_fixed_cost + rec.total_prop_cost;
  }
  json doc;
  doc["paths"] = sim.n_paths;
  doc["dt"] = sim.effective_dt();
  doc["steps"] = sim.n_steps();
  doc["mean_utility"] = utility.mean;
  doc["stderr"] = utility.stderr_mean();
  doc["mean_terminal_z"] = terminal.mean;
  doc["trades_per_year"] =
      (double)trades / ((double)sim.n_paths * sim.merton.horizon());
  doc["mean_total_costs"] = costs_total / (double)sim.n_paths;
  doc["bankrupt_paths"] = bankrupt;
  if (!cfg.output.dump.empty()) {
    std::string dump;
    write_path_csv(dump, sim, cfg.sim.dump_path);
    write_file(cfg.output.dump, dump);
  }
  return doc.dump(2) + "\n";
}

json point_json(const PointEstimate& pt) {
  json doc;
  doc["epsilon"] = pt.epsilon;
  doc["lambda"] = pt.lambda;
  doc["gamma"] = pt.gamma0;
  doc["eta"] = pt.eta0;
  doc["value"] = pt.value;
  doc["stderr"] = pt.stderr_value;
  doc["gap"] = pt.gap;
  doc["gap_stderr"] = pt.gap_stderr;
  doc["gap_vs_analytic"] = pt.gap_vs_analytic;
  doc["trades_per_year"] = pt.trades_per_year;
  doc["drift_integral"] = pt.drift_integral;
  doc["significant"] = pt.significant;
  return doc;
}

std::string run_sweep(const RunConfig& cfg) {
  SweepSpec sweep;
  sweep.epsilons = cfg.sweep.epsilons;
  sweep.coupling_c = cfg.sweep.coupling_c;
  sweep.q = cfg.sweep.q;
  sweep.paths = cfg.sweep.paths;
  sweep.seed = cfg.sim.seed;
  sweep.mode = sweep_mode(cfg.policy.mode);
  sweep.dt = cfg.sim.dt;
  sweep.search_paths = cfg.sweep.search_paths;
  sweep.full_2d_search = cfg.sweep.full_2d;

  json doc;
  std::string csv;
  if (sweep.mode == PolicyMode::simulation_search) {
    const BandScalingReport report = band_scaling(cfg.spec, sweep);
    csv = report.csv();
    doc["dt"] = report.dt;
    doc["gamma_slope"] = report.gamma_slope.slope;
    doc["gamma_slope_ci"] = {report.gamma_slope.ci.lo, report.gamma_slope.ci.hi};
    if (sweep.full_2d_search) doc["n_slope"] = report.n_slope.slope;
    json points = json::array();
    for (const auto& pt : report.points) {
      json p;
      p["epsilon"] = pt.epsilon;
      p["gamma_star"] = pt.gamma_star;
      p["gamma_star_se"] = pt.gamma_star_se;
      p["gamma_asymptotic"] = pt.gamma_asymptotic;
      p["value"] = pt.value_at_star;
      if (sweep.full_2d_search) {
        p["m_star"] = pt.m_star;
        p["n_star"] = pt.n_star;
      }
      points.push_back(p);
    }
    doc["points"] = points;
  } else {
    const ExperimentReport report = scaling_study(cfg.spec, sweep);
    csv = report.csv();
    doc["dt"] = report.dt;
    doc["control_value"] = report.control_value;
    doc["control_stderr"] = report.control_stderr;
    doc["analytic_value"] = report.analytic_value;
    doc["gap_slope"] = report.gap_slope.slope;
    doc["gap_slope_ci"] = {report.gap_slope.ci.lo, report.gap_slope.ci.hi};
    doc["points_used"] = report.gap_slope.points_used;
    json points = json::array();
    for (const auto& pt : report.points) points.push_back(point_json(pt));
    doc["points"] = points;
  }
  if (!cfg.output.csv.empty()) write_file(cfg.output.csv, csv);
  const std::string text = doc.dump(2) + "\n";
  if (!cfg.output.json.empty()) write_file(cfg.output.json, text);
  return text;
}

std::string run_density(const RunConfig& cfg) {
  SimConfig sim = build_sim_config(cfg);
  sim.options.record_occupancy = true;
  sim.options.occupancy_stride = (int)cfg.sim.stride;

  double eta_ratio = 0.0;
  if (cfg.policy.mode == "fixed") {
    eta_ratio = cfg.policy.eta / cfg.policy.gamma;
  } else {
    const auto opt = optimize_bands(
        CostCoefficients::from_merton(sim.merton, cfg.spec.z0, 0.0), cfg.costs);
    eta_ratio = opt.eta / opt.gamma;
  }

  double burnin = cfg.sim.burnin;
  if (burnin < 0) {
    const double a0 = std::abs(sim.merton.noise_coefficient(cfg.spec.z0));
    double gamma0 = cfg.policy.mode == "fixed"
                        ? cfg.policy.gamma
                        : optimal_band_fixed(std::max(cfg.costs.epsilon, 1e-12),
                                             sim.merton, cfg.spec.z0, 0.0);
    burnin = a0 > 0 ? std::min(sim.merton.horizon() / 4.0,
                               2.0 * gamma0 * gamma0 / (a0 * a0))
                    : 0.0;
  }
  sim.options.occupancy_burnin = burnin;

  const OccupancyReport report = occupancy_study(sim, eta_ratio);
  json doc;
  doc["ks"] = report.ks;
  doc["n_samples"] = report.n_samples;
  doc["eta_over_gamma"] = report.eta_over_gamma;
  doc["burnin"] = burnin;
  if (!cfg.output.csv.empty()) write_file(cfg.output.csv, report.csv());
  const std::string text = doc.dump(2) + "\n";
  if (!cfg.output.json.empty()) write_file(cfg.output.json, text);
  return text;
}

std::string run_check(int& exit_code) {
  const auto results = run_invariant_suite();
  std::string out;
  bool all_pass = true;
  for (const auto& res : results) {
    out += res.pass ? "[PASS] " : "[FAIL] ";
    out += res.name + ": " + res.detail + "\n";
    all_pass = all_pass && res.pass;
  }
  out += all_pass ? "invariant suite: all checks passed\n"
                  : "invariant suite: FAILURES above\n";
  exit_code = all_pass ? 0 : 3;
  return out;
}

}  // namespace

DispatchResult dispatch(const std::string& command, const RunConfig& cfg) {
  try {
    if (command == "merton") return {0, run_merton(cfg)};
    if (command == "bands") return {0, run_bands(cfg)};
    if (command == "freeboundary") return {0, run_freeboundary(cfg)};
    if (command == "simulate") return {0, run_simulate(cfg)};
    if (command == "sweep") return {0, run_sweep(cfg)};
    if (command == "density") return {0, run_density(cfg)};
    if (command == "check") {
      int code = 0;
      std::string out = run_check(code);
      return {code, out};
    }
    return {1, error_json("unknown command: " + command)};
  } catch (const ConfigError& e) {
    return {1, error_json(e.what())};
  } catch (const std::invalid_argument& e) {
    return {1, error_json(e.what())};
  } catch (const std::exception& e) {
    return {2, error_json(e.what())};
  }
}

}  // namespace bandlab
