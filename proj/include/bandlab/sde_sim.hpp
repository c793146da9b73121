#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bandlab/band_policy.hpp"
#include "bandlab/market.hpp"

namespace bandlab {

/// Portfolio state: stock dollars X, cash Y, wealth Z = X + Y (exact by
/// construction), displacement xi = X - m(Z,t).
struct PathState {
  double t = 0.0;
  double X = 0.0;
  double Y = 0.0;
  double Z = 0.0;
  double xi = 0.0;
};

enum class TradeSide { buy, sell };

struct TradeEvent {
  double time = 0.0;
  TradeSide side = TradeSide::buy;
  double gross = 0.0;
  double prop_cost = 0.0;
  double fixed_cost = 0.0;
  double xi_before = 0.0;
  double xi_after = 0.0;
};

/// One exact log-normal market step: X grows by exp((mu - sigma^2/2) dt +
/// sigma sqrt(dt) noise), Y by exp(r dt); Z and xi are recomputed.
PathState gbm_step(const PathState& state, double dt, double noise,
                   const MarketParams& market, double m_z);

/// Impulse trade moving the displacement to `destination_xi`. For CRRA the
/// Merton ratio is linear in wealth, so the gross amount solves a linear
/// equation in closed form. The wealth drop is exactly
/// epsilon + lambda * gross.
std::pair<PathState, TradeEvent> rebalance_to_target(const PathState& state,
                                                     double destination_xi,
                                                     const CostParams& costs,
                                                     double m_z);

/// Where the policy band comes from during a simulation.
struct BandSource {
  enum class Kind {
    fixed,             // a constant BandPolicy in displacement dollars
    merton_scaled,     // optimal band re-solved from the local (z,t) state
    wealth_fraction,   // gamma = fraction * z, eta = 0 (tight-band control)
    custom_prefactor,  // gamma = c_gamma (z/z0)^{3/4}, eta = c_eta (z/z0)^{3/4}
  };

  Kind kind = Kind::merton_scaled;
  BandPolicy fixed{1.0, 1.0, 0.0, 0.0};
  double fraction = 1e-4;
  double gamma_prefactor = 0.0;
  double eta_prefactor = 0.0;

  static BandSource fixed_policy(const BandPolicy& policy);
  static BandSource merton_scaled();
  static BandSource wealth_fraction_of(double fraction);
  static BandSource prefactor(double gamma_prefactor, double eta_prefactor = 0.0);
};

struct SimOptions {
  bool record_trades = false;
  bool record_occupancy = false;
  double occupancy_burnin = 0.0;  // years discarded before sampling xi/gamma
  int occupancy_stride = 1;
  bool accumulate_drift = false;  // integral of the heuristic loss rate
  double bankruptcy_floor = 1e-6; // fraction of z0; paths absorb below it
  // Draw xi0 from the band's equilibrium density (one uniform per path,
  // drawn in every run sharing the seed so CRN streams stay aligned). The
  // asymptotic loss rate is a quasi-steady-state quantity; horizons shorter
  // than the band mixing time gamma^2/a^2 only exhibit it when paths start
  // in equilibrium.
  bool stationary_xi0 = false;
};

/// Simulation setup. The effective step is T / n_steps with
/// n_steps = round(T / dt), so the horizon is hit exactly.
struct SimConfig {
  SimConfig(MertonSolution merton, CostParams costs, BandSource bands,
            double dt, long n_paths, std::uint64_t seed, double z0);

  MertonSolution merton;
  CostParams costs;
  BandSource bands;
  double dt;
  long n_paths;
  std::uint64_t seed;
  double z0;
  double xi0 = 0.0;
  SimOptions options;

  long n_steps() const { return n_steps_; }
  double effective_dt() const { return effective_dt_; }

  /// Rejects configurations whose monitoring grid is too coarse for the band:
  /// when trades cost money, the per-step displacement standard deviation at
  /// the initial state must not exceed one tenth of the band half-width.
  /// Frictionless runs are exempt (overshoot is free there).
  void validate() const;

 private:
  long n_steps_;
  double effective_dt_;
};

struct PathRecord {
  double terminal_z = 0.0;
  double utility = 0.0;
  long n_trades = 0;
  double total_gross = 0.0;
  double total_fixed_cost = 0.0;
  double total_prop_cost = 0.0;
  bool bankrupt = false;
  double drift_integral = 0.0;
  std::vector<TradeEvent> trades;
  std::vector<double> occupancy;  // xi / gamma samples
};

/// Deterministic function of (config.seed, path_index).
PathRecord simulate_path(const SimConfig& config, long path_index);

/// All paths, with results in path-index order regardless of the number of
/// worker threads. `threads` = 0 picks hardware concurrency, capped by the
/// BANDLAB_THREADS environment variable.
std::vector<PathRecord> simulate_all(const SimConfig& config, int threads = 0);

int effective_thread_count(int requested = 0);

/// Re-simulates one path and writes every step as CSV:
/// t,X,Y,Z,xi,event with event empty or "buy:<gross>" / "sell:<gross>".
void write_path_csv(std::string& out, const SimConfig& config, long path_index);

}  // namespace bandlab
