#include "bandlab/sde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "bandlab/rng.hpp"
#include "bandlab/stats.hpp"

namespace bandlab {

PathState gbm_step(const PathState& state, double dt, double noise,
                   const MarketParams& market, double m_z) {
  if (!(dt > 0)) throw std::invalid_argument("step: requires dt > 0");
  PathState next;
  next.t = state.t + dt;
  next.X = state.X * std::exp((market.mu - 0.5 * market.sigma * market.sigma) * dt +
                              market.sigma * std::sqrt(dt) * noise);
  next.Y = state.Y * std::exp(market.r * dt);
  next.Z = next.X + next.Y;
  next.xi = next.X - m_z * next.Z;
  return next;
}

std::pair<PathState, TradeEvent> rebalance_to_target(const PathState& state,
                                                     double destination_xi,
                                                     const CostParams& costs,
                                                     double m_z) {
  const double eps = costs.epsilon, lambda = costs.lambda;
  TradeEvent event;
  event.time = state.t;
  event.xi_before = state.xi;
  event.fixed_cost = eps;

  PathState next = state;
  if (state.xi > destination_xi) {
    // Overweight stock: sell gross g, cash receives (1-lambda) g - eps.
    event.side = TradeSide::sell;
    event.gross = (state.xi - destination_xi + m_z * eps) / (1.0 - m_z * lambda);
    next.Z = state.Z - lambda * event.gross - eps;
    next.X = state.X - event.gross;
    next.Y = next.Z - next.X;
  } else if (state.xi < destination_xi) {
    // Underweight: spend g of cash, stock receives (1-lambda) g - eps.
    event.side = TradeSide::buy;
    event.gross = (destination_xi - state.xi + eps * (1.0 - m_z)) /
                  (1.0 - lambda * (1.0 - m_z));
    next.Z = state.Z - lambda * event.gross - eps;
    next.Y = state.Y - event.gross;
    next.X = next.Z - next.Y;
  } else {
    throw std::invalid_argument("rebalance: zero-size trade requested");
  }
  if (!(event.gross > 0))
    throw std::domain_error("rebalance: target on the wrong side of the state");
  if (!(next.Z > 0))
    throw std::domain_error("rebalance: infeasible trade, wealth exhausted");
  next.xi = next.X - m_z * next.Z;
  event.prop_cost = lambda * event.gross;
  event.xi_after = next.xi;
  return {next, event};
}

BandSource BandSource::fixed_policy(const BandPolicy& policy) {
  policy.validate();
  BandSource src;
  src.kind = Kind::fixed;
  src.fixed = policy;
  return src;
}

BandSource BandSource::merton_scaled() {
  BandSource src;
  src.kind = Kind::merton_scaled;
  return src;
}

BandSource BandSource::wealth_fraction_of(double fraction) {
  if (!(fraction > 0))
    throw std::invalid_argument("bands: wealth fraction must be positive");
  BandSource src;
  src.kind = Kind::wealth_fraction;
  src.fraction = fraction;
  return src;
}

BandSource BandSource::prefactor(double gamma_prefactor, double eta_prefactor) {
  if (!(gamma_prefactor > 0) || !(eta_prefactor >= 0) ||
      !(eta_prefactor < gamma_prefactor))
    throw std::invalid_argument("bands: requires 0 <= eta < gamma prefactors");
  BandSource src;
  src.kind = Kind::custom_prefactor;
  src.gamma_prefactor = gamma_prefactor;
  src.eta_prefactor = eta_prefactor;
  return src;
}

namespace {

struct Band4 {
  double gamma, beta, eta, theta;
};

// Unique positive root of nu^8 (nu u + eps) = eps^3, the optimal-band
// stationarity condition in scale-free variables (u = w(z) lambda). Warm
// Newton with a bisection fallback; the left side is strictly increasing.
double solve_band_nu(double u, double eps, double warm) {
  auto g = [&](double nu) {
    const double nu4 = nu * nu * nu * nu;
    return nu4 * nu4 * (nu * u + eps) - eps * eps * eps;
  };
  double nu = warm;
  const double nu_cap = std::pow(eps, 0.25);  // u = 0 root; u > 0 lowers it
  if (!(nu > 0) || !(nu <= nu_cap)) nu = nu_cap;
  for (int it = 0; it < 50; ++it) {
    const double nu4 = nu * nu * nu * nu;
    const double nu7 = nu4 * nu * nu;
    const double val = nu4 * nu4 * (nu * u + eps) - eps * eps * eps;
    const double slope = nu7 * (9.0 * nu * u + 8.0 * eps);
    const double next = nu - val / slope;
    if (!(next > 0)) break;
    if (std::abs(next - nu) <= 1e-14 * nu) return next;
    nu = next;
  }
  double lo = nu_cap, hi = nu_cap;
  while (g(lo) > 0) lo *= 0.5;
  for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Resolves the band at the current wealth. For CRRA the optimal-band scale
// w(z) = (R/C)^{1/4} is exactly w0 (z/z0)^{3/4} and time-independent, so the
// per-step re-optimization reduces to one scalar root-find (or a closed form
// when lambda = 0).
class BandEvaluator {
 public:
  BandEvaluator(const SimConfig& cfg) : src_(cfg.bands), z0_(cfg.z0) {
    const MertonSolution& sol = cfg.merton;
    const double mz = sol.merton_ratio_slope();
    const double p = sol.utility().p;
    w0_ = std::pow(std::abs(12.0 * (1.0 - mz) * (1.0 - mz) * mz * mz /
                            (1.0 - p)) * z0_ * z0_ * z0_,
                   0.25);
    eps_ = cfg.costs.epsilon;
    lambda_ = cfg.costs.lambda;
    eps_quarter_ = eps_ > 0 ? std::pow(eps_, 0.25) : 0.0;
    if (src_.kind == BandSource::Kind::merton_scaled) {
      if (sol.degenerate_noise(z0_))
        throw std::domain_error("bands: a = 0 at z0, optimal band undefined");
      if (eps_ == 0.0)
        throw std::domain_error(
            "bands: merton_scaled needs epsilon > 0 (no impulse band at eps=0)");
    }
  }

  Band4 at(double z, double& nu_warm) const {
    switch (src_.kind) {
      case BandSource::Kind::fixed:
        return {src_.fixed.gamma, src_.fixed.beta, src_.fixed.eta,
                src_.fixed.theta};
      case BandSource::Kind::wealth_fraction: {
        const double g = src_.fraction * z;
        return {g, g, 0.0, 0.0};
      }
      case BandSource::Kind::custom_prefactor: {
        const double s = std::pow(z / z0_, 0.75);
        return {src_.gamma_prefactor * s, src_.gamma_prefactor * s,
                src_.eta_prefactor * s, src_.eta_prefactor * s};
      }
      case BandSource::Kind::merton_scaled:
      default: {
        const double w = w0_ * std::pow(z / z0_, 0.75);
        if (lambda_ == 0.0) {
          const double g = w * eps_quarter_;
          return {g, g, 0.0, 0.0};
        }
        const double nu = solve_band_nu(w * lambda_, eps_, nu_warm);
        nu_warm = nu;
        const double n = nu * w;
        const double m = w * eps_ / (nu * nu * nu);
        return {0.5 * (m + n), 0.5 * (m + n), 0.5 * (m - n), 0.5 * (m - n)};
      }
    }
  }

 private:
  BandSource src_;
  double z0_, w0_, eps_, lambda_, eps_quarter_;
};

}  // namespace

SimConfig::SimConfig(MertonSolution merton_in, CostParams costs_in,
                     BandSource bands_in, double dt_in, long n_paths_in,
                     std::uint64_t seed_in, double z0_in)
    : merton(std::move(merton_in)),
      costs(costs_in),
      bands(bands_in),
      dt(dt_in),
      n_paths(n_paths_in),
      seed(seed_in),
      z0(z0_in) {
  if (!(dt > 0) || !std::isfinite(dt))
    throw std::invalid_argument("sim.dt: requires dt > 0");
  n_steps_ = std::max(1L, std::lround(merton.horizon() / dt));
  effective_dt_ = merton.horizon() / (double)n_steps_;
}

void SimConfig::validate() const {
  costs.validate();
  if (n_paths < 1) throw std::invalid_argument("sim.paths: requires paths >= 1");
  if (!(z0 > 0)) throw std::invalid_argument("sim.z0: requires z0 > 0");
  if (!std::isfinite(xi0)) throw std::invalid_argument("sim.xi0: must be finite");
  if (options.occupancy_stride < 1)
    throw std::invalid_argument("sim: occupancy stride must be >= 1");
  if (bands.kind == BandSource::Kind::fixed) bands.fixed.validate();
  if (!costs.frictionless()) {
    BandEvaluator eval(*this);
    double nu = 0.0;
    const Band4 band = eval.at(z0, nu);
    const double a0 = std::abs(merton.noise_coefficient(z0));
    const double step_sd = a0 * std::sqrt(effective_dt_);
    const double width = std::min(band.gamma, band.beta);
    if (a0 > 0 && step_sd > width / 10.0)
      throw std::invalid_argument(
          "sim.dt: too coarse, per-step displacement sd exceeds band/10");
  }
}

namespace {

struct DriftModel {
  // loss rate 2 sqrt(C R eps) = 2 sqrt(eps k) e^{rho tau} z^{p - 1/2}
  double k = 0.0;
  double rho = 0.0;
  double p = 0.0;
  double horizon = 0.0;
  double eps = 0.0;

  static DriftModel from(const MertonSolution& sol, double eps) {
    DriftModel d;
    const double sigma = sol.market().sigma;
    const double mz = sol.merton_ratio_slope();
    const double p = sol.utility().p;
    d.k = -(sigma * sigma * sigma * sigma) * (p - 1.0) * (1.0 - mz) *
          (1.0 - mz) * mz * mz / 12.0;
    d.rho = sol.rho();
    d.p = p;
    d.horizon = sol.horizon();
    d.eps = eps;
    return d;
  }
  double rate(double z, double t) const {
    return 2.0 * std::sqrt(eps * k) * std::exp(rho * (horizon - t)) *
           std::pow(z, p - 0.5);
  }
};

using TraceFn = std::function<void(const PathState&, const TradeEvent*)>;

PathRecord run_path(const SimConfig& cfg, long path_index,
                    const BandEvaluator& bands, const TraceFn* trace) {
  const MertonSolution& sol = cfg.merton;
  const MarketParams& mkt = sol.market();
  const double m_z = sol.merton_ratio_slope();
  const double dt = cfg.effective_dt();
  const long n_steps = cfg.n_steps();
  const double drift_dt = (mkt.mu - 0.5 * mkt.sigma * mkt.sigma) * dt;
  const double vol_sqdt = mkt.sigma * std::sqrt(dt);
  const double cash_growth = std::exp(mkt.r * dt);
  const double floor_z = cfg.options.bankruptcy_floor * cfg.z0;
  const DriftModel drift = cfg.options.accumulate_drift
                               ? DriftModel::from(sol, cfg.costs.epsilon)
                               : DriftModel{};

  PathRng rng(cfg.seed, (std::uint64_t)path_index);
  PathRecord rec;

  double nu_warm = 0.0;
  Band4 band = bands.at(cfg.z0, nu_warm);

  double xi0 = cfg.xi0;
  if (cfg.options.stationary_xi0) {
    const HoldDensity equilibrium(band.gamma, band.eta);
    xi0 = equilibrium.quantile(rng.uniform01());
  }

  PathState st;
  st.t = 0.0;
  st.Z = cfg.z0;
  st.X = m_z * cfg.z0 + xi0;
  st.Y = st.Z - st.X;
  st.xi = xi0;

  TradeEvent last_event;
  auto apply_control = [&](PathState& s, const Band4& b) -> bool {
    double target;
    if (s.xi >= b.gamma)
      target = b.eta;
    else if (s.xi <= -b.beta)
      target = -b.theta;
    else
      return false;
    if (s.xi == target) return false;  // zero-width overshoot, nothing to do
    auto [next, event] = rebalance_to_target(s, target, cfg.costs, m_z);
    s = next;
    last_event = event;
    ++rec.n_trades;
    rec.total_gross += event.gross;
    rec.total_fixed_cost += event.fixed_cost;
    rec.total_prop_cost += event.prop_cost;
    if (cfg.options.record_trades) rec.trades.push_back(event);
    return true;
  };

  auto absorb = [&](double z) {
    rec.bankrupt = true;
    rec.terminal_z = z;
    rec.utility = sol.utility()(floor_z);
  };

  // Initial control, in case xi0 starts outside the band.
  bool traded = false;
  try {
    traded = apply_control(st, band);
  } catch (const std::domain_error&) {
    absorb(st.Z);
    if (trace) (*trace)(st, nullptr);
    return rec;
  }
  if (trace) (*trace)(st, traded ? &last_event : nullptr);

  const bool state_bands = cfg.bands.kind != BandSource::Kind::fixed;
  for (long k = 0; k < n_steps; ++k) {
    const double noise = rng.normal();
    st.t += dt;
    st.X *= std::exp(drift_dt + vol_sqdt * noise);
    st.Y *= cash_growth;
    st.Z = st.X + st.Y;
    st.xi = st.X - m_z * st.Z;
    if (!(st.Z > floor_z)) {
      absorb(st.Z);
      if (trace) (*trace)(st, nullptr);
      return rec;
    }
    if (state_bands) band = bands.at(st.Z, nu_warm);
    try {
      traded = apply_control(st, band);
    } catch (const std::domain_error&) {
      absorb(st.Z);
      if (trace) (*trace)(st, nullptr);
      return rec;
    }
    if (cfg.options.accumulate_drift)
      rec.drift_integral += drift.rate(st.Z, st.t) * dt;
    if (cfg.options.record_occupancy && st.t >= cfg.options.occupancy_burnin &&
        k % cfg.options.occupancy_stride == 0)
      rec.occupancy.push_back(st.xi / band.gamma);
    if (trace) (*trace)(st, traded ? &last_event : nullptr);
  }

  rec.terminal_z = st.Z;
  rec.utility = sol.utility()(st.Z);
  return rec;
}

}  // namespace

PathRecord simulate_path(const SimConfig& config, long path_index) {
  if (path_index < 0 || path_index >= config.n_paths)
    throw std::invalid_argument("simulate: path index out of range");
  const BandEvaluator bands(config);
  return run_path(config, path_index, bands, nullptr);
}

int effective_thread_count(int requested) {
  int n = requested > 0 ? requested : (int)std::thread::hardware_concurrency();
  if (n < 1) n = 1;
  if (const char* cap_text = std::getenv("BANDLAB_THREADS")) {
    const int cap = std::atoi(cap_text);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

std::vector<PathRecord> simulate_all(const SimConfig& config, int threads) {
  config.validate();
  const BandEvaluator bands(config);
  const long n = config.n_paths;
  std::vector<PathRecord> records((size_t)n);
  const int workers = std::min<long>(effective_thread_count(threads), n);
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) records[(size_t)i] = run_path(config, i, bands, nullptr);
    return records;
  }
  std::vector<std::thread> pool;
  pool.reserve((size_t)workers);
  const long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long begin = w * chunk;
    const long end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      for (long i = begin; i < end; ++i)
        records[(size_t)i] = run_path(config, i, bands, nullptr);
    });
  }
  for (auto& t : pool) t.join();
  return records;
}

void write_path_csv(std::string& out, const SimConfig& config, long path_index) {
  config.validate();
  const BandEvaluator bands(config);
  out += "t,X,Y,Z,xi,event\n";
  TraceFn trace = [&out](const PathState& st, const TradeEvent* event) {
    out += format_double(st.t);
    out += ',';
    out += format_double(st.X);
    out += ',';
    out += format_double(st.Y);
    out += ',';
    out += format_double(st.Z);
    out += ',';
    out += format_double(st.xi);
    out += ',';
    if (event) {
      out += event->side == TradeSide::buy ? "buy:" : "sell:";
      out += format_double(event->gross);
    }
    out += '\n';
  };
  run_path(config, path_index, bands, &trace);
}

}  // namespace bandlab
