#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bandlab/sde_sim.hpp"
#include "bandlab/stats.hpp"

namespace bandlab {

/// Everything needed to build a MertonSolution plus the initial wealth.
struct MarketSpec {
  MarketParams market{0.1, 0.02, 0.2};
  double p = -3.0;
  double horizon = 1.0;
  double z0 = 1.0;

  MertonSolution merton() const {
    return MertonSolution(market, CrraUtility{p}, horizon);
  }
};

enum class PolicyMode { asymptotic, numeric_optimal, simulation_search };

/// A geometric epsilon sweep with optional proportional-cost coupling
/// lambda = coupling_c * epsilon^q. All points share one time grid and one
/// seed so estimates are common-random-number differences.
struct SweepSpec {
  std::vector<double> epsilons;  // strictly decreasing, at least 4 points
  double coupling_c = 0.0;       // 0 disables the proportional leg
  double q = 0.75;
  long paths = 100000;
  std::uint64_t seed = 20250810;
  PolicyMode mode = PolicyMode::asymptotic;
  double dt = 0.0;           // 0 picks the finest band-resolving step
  long search_paths = 20000; // per evaluation in simulation_search
  bool full_2d_search = false;

  void validate() const;
  double lambda_at(double epsilon) const;
};

struct PointEstimate {
  double epsilon = 0.0;
  double lambda = 0.0;
  double gamma0 = 0.0;  // policy band at the initial state
  double eta0 = 0.0;
  double value = 0.0;
  double stderr_value = 0.0;
  double gap = 0.0;         // CRN gap vs the near-frictionless control
  double gap_stderr = 0.0;
  double gap_vs_analytic = 0.0;  // f0(z0, 0) - value
  double trades_per_year = 0.0;
  double drift_integral = 0.0;   // mean path integral of the heuristic rate
  bool significant = false;      // gap resolved at 3 standard errors
};

struct SlopeSummary {
  double slope = 0.0;
  double intercept = 0.0;
  SlopeInterval ci;
  int points_used = 0;
};

struct ExperimentReport {
  std::vector<PointEstimate> points;
  SlopeSummary gap_slope;
  double control_value = 0.0;
  double control_stderr = 0.0;
  double analytic_value = 0.0;
  double dt = 0.0;

  /// Sweep table: epsilon,lambda,gamma,eta,value,stderr,gap,trades_per_year
  std::string csv() const;
};

/// Sample mean and standard error of terminal utility under a configuration.
struct ValueEstimate {
  double mean = 0.0;
  double stderr_mean = 0.0;
};
ValueEstimate estimate_value(const SimConfig& config, int threads = 0);

/// Default time step: ten steps per displacement standard deviation across
/// the narrowest band in play, never coarser than 20 steps over the horizon.
/// A positive user_dt short-circuits the heuristic.
double auto_time_step(const MertonSolution& sol, double z0,
                      double narrowest_gamma, double user_dt);

/// Value-gap scaling study: for each epsilon the gap to a near-frictionless
/// control run (same noise) is estimated and log(gap) is regressed on
/// log(epsilon), with a path-resampling bootstrap interval on the slope.
ExperimentReport scaling_study(const MarketSpec& spec, const SweepSpec& sweep);

struct BandSearchPoint {
  double epsilon = 0.0;
  double gamma_star = 0.0;       // simulation-optimal band prefactor at z0
  double gamma_star_se = 0.0;    // bootstrap sd of the quadratic vertex
  double value_at_star = 0.0;
  double gamma_asymptotic = 0.0;
  double m_star = 0.0;  // populated by the 2-D search
  double n_star = 0.0;
};

struct BandScalingReport {
  std::vector<BandSearchPoint> points;
  SlopeSummary gamma_slope;
  SlopeSummary n_slope;  // only meaningful when the 2-D search ran
  double dt = 0.0;

  std::string csv() const;
};

/// Golden-section search, under common random numbers, for the
/// simulation-optimal symmetric band at each epsilon; regresses log(gamma*)
/// on log(epsilon). With full_2d_search it also searches the destination
/// offset and reports the optimal band gap n* = gamma* - eta*.
BandScalingReport band_scaling(const MarketSpec& spec, const SweepSpec& sweep);

struct HistBin {
  double left = 0.0;
  double right = 0.0;
  double empirical = 0.0;
  double analytic = 0.0;
};

struct OccupancyReport {
  double ks = 0.0;
  std::size_t n_samples = 0;
  double eta_over_gamma = 0.0;
  std::vector<HistBin> bins;

  /// Histogram table: bin_left,bin_right,empirical,analytic
  std::string csv() const;
};

/// Pools xi/gamma samples from a long-horizon run and compares them with the
/// equilibrium hold density (Kolmogorov-Smirnov distance plus a binned
/// histogram). `eta_over_gamma` is the destination offset of the policy in
/// band units. Requires at least 10^4 pooled samples.
OccupancyReport occupancy_study(const SimConfig& config, double eta_over_gamma,
                                int bins = 40);

struct DriftCheckReport {
  double gap = 0.0;
  double gap_stderr = 0.0;
  double integral = 0.0;
  double ratio = 0.0;  // gap / integral
  bool significant = false;
};

/// Compares the measured CRN value gap at one epsilon (fixed-cost-only,
/// asymptotic band) against the path integral of the pointwise heuristic
/// loss rate 2 sqrt(C R epsilon).
DriftCheckReport drift_integral_check(const MarketSpec& spec, double epsilon,
                                      long paths, std::uint64_t seed,
                                      double dt = 0.0);

}  // namespace bandlab
