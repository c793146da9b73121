#include "bandlab/checks.hpp"

#include <algorithm>
#include <cmath>

#include "bandlab/band_policy.hpp"
#include "bandlab/expansion.hpp"
#include "bandlab/market.hpp"
#include "bandlab/rng.hpp"
#include "bandlab/stats.hpp"

namespace bandlab {
namespace {

// 8-point Gauss-Legendre on [a, b]; exact for polynomials up to degree 15,
// far beyond the piecewise-cubic integrands it is used on here.
double gauss8(const std::function<double(double)>& f, double a, double b) {
  static const double nodes[4] = {0.1834346424956498, 0.5255324099163290,
                                  0.7966664774136267, 0.9602898564975363};
  static const double weights[4] = {0.3626837833783620, 0.3137066458778873,
                                    0.2223810344533745, 0.1012285362903763};
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i)
    sum += weights[i] * (f(mid + half * nodes[i]) + f(mid - half * nodes[i]));
  return half * sum;
}

double uniform_in(PathRng& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.uniform01();
}

CheckResult merton_pde_grid() {
  CheckResult result{"merton-pde-grid", false, ""};
  const MertonSolution sol(MarketParams{0.1, 0.02, 0.2}, CrraUtility{-3.0}, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double z = 0.75 + (2.0 - 0.75) * i / 49.0;
    for (int j = 0; j < 50; ++j) {
      const double t = 0.9 * j / 49.0;
      const double res =
          std::abs(pde_residual(sol, z, t, 1e-4 * z, 1e-4));
      worst = std::max(worst, res);
    }
  }
  result.pass = worst <= 1e-6;
  result.detail = "max |residual| = " + format_double(worst) + " (tol 1e-6)";
  return result;
}

CheckResult density_suite() {
  CheckResult result{"density-suite", false, ""};
  PathRng rng(0x64656e73ULL, 1);
  double worst_mass = 0.0, worst_moment = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double gamma = std::exp(uniform_in(rng, std::log(0.01), std::log(10.0)));
    const double eta = gamma * uniform_in(rng, 0.0, 0.95);
    const HoldDensity density(gamma, eta);
    auto pdf = [&density](double xi) { return density.pdf(xi); };
    auto xi2pdf = [&density](double xi) { return xi * xi * density.pdf(xi); };
    double mass = gauss8(pdf, -gamma, -eta) + gauss8(pdf, -eta, eta) +
                  gauss8(pdf, eta, gamma);
    double moment = gauss8(xi2pdf, -gamma, -eta) + gauss8(xi2pdf, -eta, eta) +
                    gauss8(xi2pdf, eta, gamma);
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    worst_moment =
        std::max(worst_moment, std::abs(moment - density.second_moment()));
  }
  result.pass = worst_mass <= 1e-10 && worst_moment <= 1e-8;
  result.detail = "max |mass-1| = " + format_double(worst_mass) +
                  ", max moment error = " + format_double(worst_moment);
  return result;
}

CheckResult free_boundary_recovery() {
  CheckResult result{"free-boundary", false, ""};
  const auto sol = solve_free_boundary(-1.0, 1.0, 1.0 / 6.0);
  double worst = std::abs(sol.gamma - 1.0);
  worst = std::max(worst, std::abs(sol.beta - 1.0));
  worst = std::max(worst, std::abs(sol.eta));
  worst = std::max(worst, std::abs(sol.theta));
  worst = std::max(worst, std::abs(sol.c1));
  worst = std::max(worst, std::abs(sol.K - 1.0 / 3.0));
  bool pass = worst <= 1e-8;

  PathRng rng(0x66726565ULL, 2);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    MarketParams market;
    CrraUtility utility;
    double z, t, horizon;
    for (;;) {
      market.mu = uniform_in(rng, -0.05, 0.15);
      market.r = uniform_in(rng, 0.0, 0.06);
      market.sigma = uniform_in(rng, 0.1, 0.5);
      utility.p = uniform_in(rng, -5.0, 0.9);
      horizon = uniform_in(rng, 0.5, 2.0);
      z = uniform_in(rng, 0.3, 3.0);
      t = uniform_in(rng, 0.0, 0.8) * horizon;
      if (utility.p == 0.0 || std::abs(market.mu - market.r) < 0.01) continue;
      const MertonSolution probe(market, utility, horizon);
      if (std::abs(1.0 - probe.merton_ratio_slope()) < 0.05) continue;
      if (std::abs(probe.noise_coefficient(z)) < 1e-4) continue;
      break;
    }
    const MertonSolution merton(market, utility, horizon);
    const auto report = expansion_consistency(merton, z, t);
    worst_rel = std::max(worst_rel, report.rel_mismatch);
    pass = pass && report.solution.eta == 0.0 && report.solution.theta == 0.0;
  }
  pass = pass && worst_rel <= 1e-10;
  result.pass = pass;
  result.detail = "exact-instance error = " + format_double(worst) +
                  ", max band mismatch = " + format_double(worst_rel);
  return result;
}

double grid_best_F(const CostCoefficients& coeffs, const CostParams& costs) {
  const int side = 200;
  const double lo = 1e-4, hi = 1.0;
  const double step = std::log(hi / lo) / (side - 1);
  double best = -1e300;
  for (int i = 0; i < side; ++i) {
    const double m = lo * std::exp(step * i);
    for (int j = 0; j < side; ++j) {
      const double n = lo * std::exp(step * j);
      best = std::max(best, cost_rate_F(m, n, coeffs, costs));
    }
  }
  return best;
}

CheckResult optimizer_vs_oracle() {
  CheckResult result{"optimizer-oracle", false, ""};
  bool pass = true;
  double worst_foc = 0.0, worst_gap = 0.0;

  std::vector<std::pair<CostCoefficients, CostParams>> cases;
  CostCoefficients unit;
  unit.C = -1.0;
  unit.R = -1.0;
  cases.push_back({unit, CostParams{1e-4, 0.0}});
  cases.push_back({unit, CostParams{1e-4, 1e-3}});
  cases.push_back({unit, CostParams{1e-4, std::pow(1e-4, 0.75)}});
  PathRng rng(0x6f707469ULL, 3);
  for (int trial = 0; trial < 5; ++trial) {
    CostCoefficients coeffs;
    coeffs.C = -std::exp(uniform_in(rng, -5.0, 2.0));
    coeffs.R = -std::exp(uniform_in(rng, -7.0, 1.0));
    const double eps = std::exp(uniform_in(rng, std::log(1e-6), std::log(1e-2)));
    const double lambda =
        trial % 2 == 0 ? 0.0 : std::pow(eps, uniform_in(rng, 0.5, 1.0));
    cases.push_back({coeffs, CostParams{eps, lambda}});
  }

  for (const auto& [coeffs, costs] : cases) {
    const BandOptimum opt = optimize_bands(coeffs, costs);
    const double oracle = grid_best_F(coeffs, costs);
    const double slack = 1e-12 * std::abs(oracle);
    if (opt.value < oracle - slack) {
      pass = false;
      worst_gap = std::max(worst_gap, oracle - opt.value);
    }
    const double scale_m =
        std::abs(coeffs.C * opt.m_sum) +
        std::abs(coeffs.R * (opt.n_diff * costs.lambda + costs.epsilon) /
                 (opt.m_sum * opt.m_sum * opt.n_diff));
    const double scale_n =
        std::abs(coeffs.C * opt.n_diff) +
        std::abs(coeffs.R * costs.epsilon /
                 (opt.m_sum * opt.n_diff * opt.n_diff));
    const double rel = std::max(std::abs(opt.foc[0]) / scale_m,
                                std::abs(opt.foc[1]) / scale_n);
    worst_foc = std::max(worst_foc, rel);
  }
  pass = pass && worst_foc <= 1e-10;

  // lambda = 0 limit against the closed form at a Merton point.
  const MertonSolution sol(MarketParams{0.1, 0.02, 0.2}, CrraUtility{-3.0}, 1.0);
  const double eps = 1e-4;
  const BandOptimum opt =
      optimize_bands(CostCoefficients::from_merton(sol, 1.0, 0.0),
                     CostParams{eps, 0.0});
  const double closed = optimal_band_fixed(eps, sol, 1.0, 0.0);
  const double rel_closed = std::abs(opt.gamma - closed) / closed;
  pass = pass && rel_closed <= 1e-10 && std::abs(opt.eta) <= 1e-14;

  result.pass = pass;
  result.detail = "max rel FOC = " + format_double(worst_foc) +
                  ", closed-form mismatch = " + format_double(rel_closed) +
                  (worst_gap > 0 ? ", grid beat optimizer by " + format_double(worst_gap)
                                 : "");
  return result;
}

CheckResult balance_solver() {
  CheckResult result{"balance-solver", false, ""};
  const double omega_unit = solve_omega(-1.0, -std::sqrt(2.0));
  double worst = std::abs(omega_unit - 1.0);
  bool pass = worst <= 1e-12;

  PathRng rng(0x62616c61ULL, 4);
  double worst_identity = 0.0, worst_residual = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    CostCoefficients coeffs;
    coeffs.C = -std::exp(uniform_in(rng, -4.0, 2.0));
    coeffs.R = -std::exp(uniform_in(rng, -4.0, 2.0));
    const double eps = std::exp(uniform_in(rng, std::log(1e-7), std::log(1e-2)));
    const BalanceSolution bal = asymptotic_bands(eps, coeffs);
    const double identity =
        std::abs(bal.m_sum - bal.n_diff * std::sqrt(bal.omega + 1.0)) /
        bal.m_sum;
    worst_identity = std::max(worst_identity, identity);
    const double w4 = bal.omega * bal.omega * bal.omega * bal.omega;
    const double residual = std::abs(coeffs.C * coeffs.C * w4 * w4 *
                                         (bal.omega + 1.0) -
                                     coeffs.R * coeffs.R) /
                            (coeffs.R * coeffs.R);
    worst_residual = std::max(worst_residual, residual);
  }
  pass = pass && worst_identity <= 1e-12 && worst_residual <= 1e-10;
  result.pass = pass;
  result.detail = "|omega-1| = " + format_double(worst) +
                  ", max identity error = " + format_double(worst_identity) +
                  ", max residual = " + format_double(worst_residual);
  return result;
}

}  // namespace

std::vector<CheckResult> run_invariant_suite() {
  std::vector<CheckResult> results;
  results.push_back(merton_pde_grid());
  results.push_back(density_suite());
  results.push_back(free_boundary_recovery());
  results.push_back(optimizer_vs_oracle());
  results.push_back(balance_solver());
  return results;
}

}  // namespace bandlab
