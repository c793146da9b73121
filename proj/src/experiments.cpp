#include "bandlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "bandlab/rng.hpp"

namespace bandlab {

void SweepSpec::validate() const {
  if (epsilons.size() < 4)
    throw std::invalid_argument("sweep.epsilons: need at least 4 points");
  for (size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0))
      throw std::invalid_argument("sweep.epsilons: must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
      throw std::invalid_argument("sweep.epsilons: must be strictly decreasing");
  }
  if (!(q >= 0) || !(q <= 2))
    throw std::invalid_argument("sweep.q: requires 0 <= q <= 2");
  if (coupling_c < 0)
    throw std::invalid_argument("sweep.coupling_c: requires c >= 0");
  if (paths < 2) throw std::invalid_argument("sweep.paths: requires paths >= 2");
  if (search_paths < 2)
    throw std::invalid_argument("sweep.search_paths: requires paths >= 2");
  if (dt < 0) throw std::invalid_argument("sweep.dt: requires dt >= 0");
  if (mode == PolicyMode::asymptotic && coupling_c != 0.0 &&
      !(coupling_c == 1.0 && q == 0.75))
    throw std::invalid_argument(
        "sweep.mode: asymptotic bands need lambda = 0 or lambda = eps^{3/4}; "
        "use numeric-optimal otherwise");
}

double SweepSpec::lambda_at(double epsilon) const {
  return coupling_c == 0.0 ? 0.0 : coupling_c * std::pow(epsilon, q);
}

ValueEstimate estimate_value(const SimConfig& config, int threads) {
  const auto records = simulate_all(config, threads);
  MeanVar acc;
  for (const auto& rec : records) acc.add(rec.utility);
  return {acc.mean, acc.stderr_mean()};
}

double auto_time_step(const MertonSolution& sol, double z0,
                      double narrowest_gamma, double user_dt) {
  if (user_dt > 0) return user_dt;
  const double a0 = std::abs(sol.noise_coefficient(z0));
  if (a0 == 0.0) return sol.horizon() / 64.0;
  const double dt =
      0.9 * std::pow(narrowest_gamma / (10.0 * a0), 2.0);
  return std::min(dt, sol.horizon() / 20.0);
}

namespace {

constexpr double kControlFraction = 1e-4;

// Policy band at the initial state for a cost pair.
BandOptimum initial_bands(const MertonSolution& sol, double z0,
                          const CostParams& costs) {
  return optimize_bands(CostCoefficients::from_merton(sol, z0, 0.0), costs);
}

std::vector<double> utilities_of(const std::vector<PathRecord>& records) {
  std::vector<double> out(records.size());
  for (size_t i = 0; i < records.size(); ++i) out[i] = records[i].utility;
  return out;
}

SlopeSummary fit_gap_slope(const std::vector<double>& eps,
                           const std::vector<double>& gaps,
                           const std::vector<std::vector<double>>& per_path,
                           std::uint64_t seed) {
  std::vector<double> lx, ly;
  std::vector<std::vector<double>> cols;
  for (size_t j = 0; j < eps.size(); ++j) {
    if (gaps[j] > 0) {
      lx.push_back(std::log(eps[j]));
      ly.push_back(std::log(gaps[j]));
      cols.push_back(per_path[j]);
    }
  }
  if (lx.size() < 2)
    throw std::runtime_error("scaling_study: fewer than 2 resolved gap points");
  SlopeSummary out;
  const LineFit fit = fit_line(lx, ly);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.points_used = (int)lx.size();
  out.ci = bootstrap_log_slope(lx, cols, 200, seed ^ 0x626f6f7473ULL);
  return out;
}

}  // namespace

ExperimentReport scaling_study(const MarketSpec& spec, const SweepSpec& sweep) {
  sweep.validate();
  const MertonSolution sol = spec.merton();

  // Narrowest band across the sweep sets the common step.
  double narrowest = 0.0;
  for (double eps : sweep.epsilons) {
    const auto bands = initial_bands(sol, spec.z0, {eps, sweep.lambda_at(eps)});
    narrowest = narrowest == 0.0 ? bands.gamma : std::min(narrowest, bands.gamma);
  }
  const double dt = auto_time_step(sol, spec.z0, narrowest, sweep.dt);

  SimConfig control(sol, CostParams{0.0, 0.0},
                    BandSource::wealth_fraction_of(kControlFraction), dt,
                    sweep.paths, sweep.seed, spec.z0);
  control.options.stationary_xi0 = true;
  const auto control_utilities = utilities_of(simulate_all(control));
  MeanVar control_acc;
  for (double u : control_utilities) control_acc.add(u);

  ExperimentReport report;
  report.dt = control.effective_dt();
  report.control_value = control_acc.mean;
  report.control_stderr = control_acc.stderr_mean();
  report.analytic_value = sol.value(spec.z0, 0.0);

  std::vector<double> gaps;
  std::vector<std::vector<double>> per_path_diffs;
  for (double eps : sweep.epsilons) {
    const CostParams costs{eps, sweep.lambda_at(eps)};
    SimConfig cfg(sol, costs, BandSource::merton_scaled(), dt, sweep.paths,
                  sweep.seed, spec.z0);
    cfg.options.accumulate_drift = costs.lambda == 0.0;
    cfg.options.stationary_xi0 = true;
    const auto records = simulate_all(cfg);

    PointEstimate pt;
    pt.epsilon = eps;
    pt.lambda = costs.lambda;
    const auto bands = initial_bands(sol, spec.z0, costs);
    pt.gamma0 = bands.gamma;
    pt.eta0 = bands.eta;

    MeanVar value_acc, gap_acc, trades_acc, drift_acc;
    std::vector<double> diffs(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
      value_acc.add(records[i].utility);
      diffs[i] = control_utilities[i] - records[i].utility;
      gap_acc.add(diffs[i]);
      trades_acc.add((double)records[i].n_trades);
      drift_acc.add(records[i].drift_integral);
    }
    pt.value = value_acc.mean;
    pt.stderr_value = value_acc.stderr_mean();
    pt.gap = gap_acc.mean;
    pt.gap_stderr = gap_acc.stderr_mean();
    pt.gap_vs_analytic = report.analytic_value - pt.value;
    pt.trades_per_year = trades_acc.mean / sol.horizon();
    pt.drift_integral = drift_acc.mean;
    pt.significant = pt.gap > 3.0 * pt.gap_stderr;

    report.points.push_back(pt);
    gaps.push_back(pt.gap);
    per_path_diffs.push_back(std::move(diffs));
  }

  report.gap_slope =
      fit_gap_slope(sweep.epsilons, gaps, per_path_diffs, sweep.seed);
  return report;
}

std::string ExperimentReport::csv() const {
  std::string out = "epsilon,lambda,gamma,eta,value,stderr,gap,trades_per_year\n";
  for (const auto& pt : points) {
    out += format_double(pt.epsilon);
    out += ',';
    out += format_double(pt.lambda);
    out += ',';
    out += format_double(pt.gamma0);
    out += ',';
    out += format_double(pt.eta0);
    out += ',';
    out += format_double(pt.value);
    out += ',';
    out += format_double(pt.stderr_value);
    out += ',';
    out += format_double(pt.gap);
    out += ',';
    out += format_double(pt.trades_per_year);
    out += '\n';
  }
  return out;
}

namespace {

// Parabolic vertex through three points; falls back to the middle abscissa
// when the data is not locally concave.
double quadratic_vertex(const double x[3], const double y[3]) {
  const double d21 = x[1] - x[0], d23 = x[1] - x[2];
  const double num = d21 * d21 * (y[1] - y[2]) - d23 * d23 * (y[1] - y[0]);
  const double den = d21 * (y[1] - y[2]) - d23 * (y[1] - y[0]);
  if (den == 0.0) return x[1];
  const double vertex = x[1] - 0.5 * num / den;
  if (!(vertex > std::min({x[0], x[2]})) || !(vertex < std::max({x[0], x[2]})))
    return x[1];
  return vertex;
}

struct ProbeData {
  double x[3];
  std::vector<double> utilities[3];  // per-path terminal utilities
};

// Bootstrap sd of the quadratic-vertex band estimate under path resampling.
double vertex_bootstrap_sd(const ProbeData& probe, std::uint64_t seed,
                           int replicates) {
  const size_t n = probe.utilities[0].size();
  PathRng rng(seed, 0x766572ULL);
  MeanVar acc;
  for (int b = 0; b < replicates; ++b) {
    double sums[3] = {0, 0, 0};
    for (size_t i = 0; i < n; ++i) {
      const size_t idx = (size_t)(rng.next_u64() % n);
      for (int k = 0; k < 3; ++k) sums[k] += probe.utilities[k][idx];
    }
    double means[3];
    for (int k = 0; k < 3; ++k) means[k] = sums[k] / (double)n;
    acc.add(quadratic_vertex(probe.x, means));
  }
  return std::sqrt(acc.variance());
}

}  // namespace

BandScalingReport band_scaling(const MarketSpec& spec, const SweepSpec& sweep) {
  sweep.validate();
  const MertonSolution sol = spec.merton();
  const double z0 = spec.z0;

  BandScalingReport report;
  std::vector<double> log_eps, log_gamma, log_n;
  std::vector<double> vertex_sds;

  for (double eps : sweep.epsilons) {
    const CostParams costs{eps, sweep.lambda_at(eps)};
    const auto asym = initial_bands(sol, z0, costs);
    const double center = asym.gamma;
    const double lo = center / 3.0, hi = center * 3.0;
    const double dt = auto_time_step(sol, z0, lo, sweep.dt);

    auto run_value = [&](const BandSource& src) {
      SimConfig cfg(sol, costs, src, dt, sweep.search_paths, sweep.seed, z0);
      cfg.options.stationary_xi0 = true;
      return estimate_value(cfg).mean;
    };
    auto value_at = [&](double gamma_prefactor) {
      return run_value(BandSource::prefactor(gamma_prefactor));
    };

    BandSearchPoint pt;
    pt.epsilon = eps;
    pt.gamma_asymptotic = center;
    const GoldenResult best = golden_max(value_at, lo, hi, 0.01);
    pt.gamma_star = best.x;
    pt.value_at_star = best.value;

    // Probe triple around the optimum for a path-resampling vertex CI.
    ProbeData probe;
    probe.x[0] = best.x * 0.94;
    probe.x[1] = best.x;
    probe.x[2] = best.x * 1.06;
    for (int k = 0; k < 3; ++k) {
      SimConfig cfg(sol, costs, BandSource::prefactor(probe.x[k]), dt,
                    sweep.search_paths, sweep.seed, z0);
      cfg.options.stationary_xi0 = true;
      probe.utilities[k] = utilities_of(simulate_all(cfg));
    }
    double means[3];
    for (int k = 0; k < 3; ++k) {
      MeanVar acc;
      for (double u : probe.utilities[k]) acc.add(u);
      means[k] = acc.mean;
    }
    pt.gamma_star = quadratic_vertex(probe.x, means);
    pt.gamma_star_se = vertex_bootstrap_sd(probe, sweep.seed ^ 0x67616dULL, 120);

    if (sweep.full_2d_search) {
      // Nested golden over (gamma, eta/gamma).
      auto value_2d = [&](double gamma_pre, double ratio) {
        return run_value(BandSource::prefactor(gamma_pre, ratio * gamma_pre));
      };
      auto best_ratio_value = [&](double gamma_pre) {
        return golden_max(
                   [&](double ratio) { return value_2d(gamma_pre, ratio); },
                   0.02, 0.9, 0.05)
            .value;
      };
      const GoldenResult outer =
          golden_max(best_ratio_value, center / 2.0, center * 2.0, 0.03);
      const GoldenResult inner = golden_max(
          [&](double ratio) { return value_2d(outer.x, ratio); }, 0.02, 0.9,
          0.03);
      pt.m_star = outer.x * (1.0 + inner.x);
      pt.n_star = outer.x * (1.0 - inner.x);
    }

    report.points.push_back(pt);
    log_eps.push_back(std::log(eps));
    log_gamma.push_back(std::log(pt.gamma_star));
    if (sweep.full_2d_search) log_n.push_back(std::log(pt.n_star));
    vertex_sds.push_back(pt.gamma_star_se);
    report.dt = dt;  // finest point's grid, reported for reference
  }

  const LineFit fit = fit_line(log_eps, log_gamma);
  report.gamma_slope.slope = fit.slope;
  report.gamma_slope.intercept = fit.intercept;
  report.gamma_slope.points_used = (int)log_eps.size();
  // Parametric interval from the per-point vertex sds (delta method on logs).
  {
    PathRng rng(sweep.seed, 0x736c6f70ULL);
    std::vector<double> slopes;
    slopes.reserve(200);
    std::vector<double> ly(log_eps.size());
    for (int b = 0; b < 200; ++b) {
      for (size_t j = 0; j < log_eps.size(); ++j) {
        const double g = std::exp(log_gamma[j]) + vertex_sds[j] * rng.normal();
        if (!(g > 0)) {
          ly.clear();
          break;
        }
        ly[j] = std::log(g);
      }
      if (ly.size() != log_eps.size()) {
        ly.resize(log_eps.size());
        continue;
      }
      slopes.push_back(fit_line(log_eps, ly).slope);
    }
    if (!slopes.empty()) {
      std::sort(slopes.begin(), slopes.end());
      report.gamma_slope.ci.lo = slopes[(size_t)(0.025 * (slopes.size() - 1))];
      report.gamma_slope.ci.hi = slopes[(size_t)(0.975 * (slopes.size() - 1))];
      report.gamma_slope.ci.replicates_used = (int)slopes.size();
    }
  }

  if (sweep.full_2d_search && log_n.size() >= 2) {
    const LineFit nfit = fit_line(log_eps, log_n);
    report.n_slope.slope = nfit.slope;
    report.n_slope.intercept = nfit.intercept;
    report.n_slope.points_used = (int)log_n.size();
  }
  return report;
}

std::string BandScalingReport::csv() const {
  std::string out = "epsilon,gamma_star,gamma_star_se,gamma_asymptotic,value,m_star,n_star\n";
  for (const auto& pt : points) {
    out += format_double(pt.epsilon);
    out += ',';
    out += format_double(pt.gamma_star);
    out += ',';
    out += format_double(pt.gamma_star_se);
    out += ',';
    out += format_double(pt.gamma_asymptotic);
    out += ',';
    out += format_double(pt.value_at_star);
    out += ',';
    out += format_double(pt.m_star);
    out += ',';
    out += format_double(pt.n_star);
    out += '\n';
  }
  return out;
}

OccupancyReport occupancy_study(const SimConfig& config, double eta_over_gamma,
                                int bins) {
  if (!config.options.record_occupancy)
    throw std::invalid_argument("occupancy_study: config must record occupancy");
  if (bins < 4) throw std::invalid_argument("occupancy_study: too few bins");

  const auto records = simulate_all(config);
  std::vector<double> samples;
  for (const auto& rec : records)
    samples.insert(samples.end(), rec.occupancy.begin(), rec.occupancy.end());
  if (samples.size() < 10000)
    throw std::runtime_error("occupancy_study: fewer than 10^4 samples");

  const HoldDensity ref(1.0, eta_over_gamma);
  OccupancyReport report;
  report.n_samples = samples.size();
  report.eta_over_gamma = eta_over_gamma;
  report.ks = ks_distance(samples, [&ref](double x) { return ref.cdf(x); });

  report.bins.resize((size_t)bins);
  const double width = 2.0 / bins;
  std::vector<long> counts((size_t)bins, 0);
  for (double s : samples) {
    int idx = (int)((s + 1.0) / width);
    idx = std::clamp(idx, 0, bins - 1);
    ++counts[(size_t)idx];
  }
  for (int i = 0; i < bins; ++i) {
    HistBin& bin = report.bins[(size_t)i];
    bin.left = -1.0 + i * width;
    bin.right = bin.left + width;
    bin.empirical = (double)counts[(size_t)i] / ((double)samples.size() * width);
    bin.analytic = (ref.cdf(bin.right) - ref.cdf(bin.left)) / width;
  }
  return report;
}

std::string OccupancyReport::csv() const {
  std::string out = "bin_left,bin_right,empirical,analytic\n";
  for (const auto& bin : bins) {
    out += format_double(bin.left);
    out += ',';
    out += format_double(bin.right);
    out += ',';
    out += format_double(bin.empirical);
    out += ',';
    out += format_double(bin.analytic);
    out += '\n';
  }
  return out;
}

DriftCheckReport drift_integral_check(const MarketSpec& spec, double epsilon,
                                      long paths, std::uint64_t seed,
                                      double dt) {
  const MertonSolution sol = spec.merton();
  DriftCheckReport report;

  if (epsilon == 0.0) {
    // Frictionless limit: the band run is the control run; both the gap and
    // the heuristic integral vanish identically.
    return report;
  }

  const double gamma0 = optimal_band_fixed(epsilon, sol, spec.z0, 0.0);
  const double step = auto_time_step(sol, spec.z0, gamma0, dt);

  SimConfig control(sol, CostParams{0.0, 0.0},
                    BandSource::wealth_fraction_of(kControlFraction), step,
                    paths, seed, spec.z0);
  control.options.stationary_xi0 = true;
  SimConfig banded(sol, CostParams{epsilon, 0.0}, BandSource::merton_scaled(),
                   step, paths, seed, spec.z0);
  banded.options.accumulate_drift = true;
  banded.options.stationary_xi0 = true;

  const auto control_records = simulate_all(control);
  const auto band_records = simulate_all(banded);

  MeanVar gap_acc, integral_acc;
  for (size_t i = 0; i < band_records.size(); ++i) {
    gap_acc.add(control_records[i].utility - band_records[i].utility);
    integral_acc.add(band_records[i].drift_integral);
  }
  report.gap = gap_acc.mean;
  report.gap_stderr = gap_acc.stderr_mean();
  report.integral = integral_acc.mean;
  report.significant = report.gap > 3.0 * report.gap_stderr;
  report.ratio = report.integral != 0.0 ? report.gap / report.integral : 0.0;
  return report;
}

}  // namespace bandlab
