#include "bandlab/band_policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bandlab {

void CostParams::validate() const {
  if (!std::isfinite(epsilon) || !std::isfinite(lambda))
    throw std::invalid_argument("costs: epsilon, lambda must be finite");
  if (epsilon < 0) throw std::invalid_argument("costs.epsilon: requires epsilon >= 0");
  if (lambda < 0 || lambda >= 1)
    throw std::invalid_argument("costs.lambda: requires 0 <= lambda < 1");
}

BandPolicy BandPolicy::symmetric(double gamma, double eta) {
  BandPolicy policy{gamma, gamma, eta, eta};
  policy.validate();
  return policy;
}

void BandPolicy::validate() const {
  if (!std::isfinite(gamma) || !std::isfinite(beta) || !std::isfinite(eta) ||
      !std::isfinite(theta))
    throw std::invalid_argument("policy: band parameters must be finite");
  if (!(eta >= 0) || !(eta < gamma))
    throw std::invalid_argument("policy: requires 0 <= eta < gamma");
  if (!(theta >= 0) || !(theta < beta))
    throw std::invalid_argument("policy: requires 0 <= theta < beta");
}

CostCoefficients CostCoefficients::from_merton(const MertonSolution& sol,
                                               double z, double t) {
  CostCoefficients coeffs;
  coeffs.fz = sol.value_z(z, t);
  coeffs.fzz = sol.value_zz(z, t);
  coeffs.a = sol.noise_coefficient(z);
  const double sigma = sol.market().sigma;
  coeffs.C = sigma * sigma * coeffs.fzz / 12.0;
  coeffs.R = -coeffs.fz * coeffs.a * coeffs.a;
  return coeffs;
}

void CostCoefficients::validate() const {
  if (!(C < 0) || !(R < 0))
    throw std::invalid_argument("coefficients: requires C < 0 and R < 0");
}

HoldDensity::HoldDensity(double gamma, double eta) : gamma_(gamma), eta_(eta) {
  if (!(gamma > 0) || !(eta >= 0) || !(eta < gamma))
    throw std::invalid_argument("density: requires 0 <= eta < gamma");
}

double HoldDensity::pdf(double xi) const {
  if (std::abs(xi) > gamma_ * (1.0 + 4e-16))
    throw std::domain_error("density: |xi| beyond the hold boundary");
  const double ramp = std::max(std::abs(xi) - eta_, 0.0);
  const double value =
      1.0 / (gamma_ + eta_) - ramp / (gamma_ * gamma_ - eta_ * eta_);
  return std::max(value, 0.0);  // exact zero at the boundary, not -1 ulp
}

double HoldDensity::cdf(double xi) const {
  const double g = gamma_, e = eta_;
  if (xi <= -g) return 0.0;
  if (xi >= g) return 1.0;
  const double span = g * g - e * e;
  if (xi <= -e) return (xi + g) * (xi + g) / (2.0 * span);
  if (xi < e) return (g - e) / (2.0 * (g + e)) + (xi + e) / (g + e);
  return 1.0 - (g - xi) * (g - xi) / (2.0 * span);
}

double HoldDensity::quantile(double u) const {
  if (!(u >= 0) || !(u <= 1))
    throw std::invalid_argument("density: quantile needs u in [0, 1]");
  const double g = gamma_, e = eta_;
  const double span = g * g - e * e;
  const double lower_mass = (g - e) / (2.0 * (g + e));
  if (u <= lower_mass) return -g + std::sqrt(2.0 * u * span);
  if (u >= 1.0 - lower_mass) return g - std::sqrt(2.0 * (1.0 - u) * span);
  return -e + (u - lower_mass) * (g + e);
}

double HoldDensity::second_moment() const {
  return (gamma_ * gamma_ + eta_ * eta_) / 6.0;
}

double hit_rate(double a, double gamma, double eta) {
  if (a == 0.0) throw std::domain_error("hit_rate: no diffusion (a = 0)");
  if (!(gamma > 0) || !(eta >= 0))
    throw std::invalid_argument("hit_rate: requires gamma > 0, eta >= 0");
  if (!(eta < gamma))
    throw std::domain_error("hit_rate: degenerate band (eta >= gamma)");
  return a * a / (2.0 * (gamma * gamma - eta * eta));
}

namespace {

void check_band_variables(double m_sum, double n_diff) {
  if (!(m_sum > 0) || !(n_diff > 0))
    throw std::invalid_argument("bands: requires m_sum > 0 and n_diff > 0");
}

}  // namespace

double cost_rate_F(double m_sum, double n_diff, const CostCoefficients& coeffs,
                   const CostParams& costs) {
  check_band_variables(m_sum, n_diff);
  return 0.5 * coeffs.C * (m_sum * m_sum + n_diff * n_diff) +
         coeffs.R / (m_sum * n_diff) * (n_diff * costs.lambda + costs.epsilon);
}

std::array<double, 2> foc_residual(double m_sum, double n_diff,
                                   const CostCoefficients& coeffs,
                                   const CostParams& costs) {
  check_band_variables(m_sum, n_diff);
  const double m = m_sum, n = n_diff;
  const double fee = n * costs.lambda + costs.epsilon;
  const double f_m = coeffs.C * m - coeffs.R / (m * m * n) * fee;
  const double f_n = coeffs.C * n - coeffs.R / (m * n * n) * costs.epsilon;
  return {f_m, f_n};
}

BandPolicy BandOptimum::policy() const {
  if (boundary_limit)
    throw std::domain_error(
        "bands: epsilon = 0 optimum has eta = gamma; no impulse band exists");
  return BandPolicy::symmetric(gamma, eta);
}

namespace {

// Stationarity of F reduces, via m = R eps / (C n^3), to the monotone scalar
// equation  C^2 n^8 (n lambda + eps) = R^2 eps^3.
double scalar_equation(double n, double C, double R, double eps, double lambda) {
  const double n4 = n * n * n * n;
  return C * C * n4 * n4 * (n * lambda + eps) - R * R * eps * eps * eps;
}

BandOptimum grid_search_optimum(const CostCoefficients& coeffs,
                                const CostParams& costs, double center_m,
                                double center_n) {
  // 200x200 log grid spanning three decades around the seed, then refine.
  double best_m = center_m, best_n = center_n;
  double best_f = cost_rate_F(best_m, best_n, coeffs, costs);
  double span = 1e3;
  for (int round = 0; round < 6; ++round) {
    const int side = 200;
    const double lo_m = best_m / span, hi_m = best_m * span;
    const double lo_n = best_n / span, hi_n = best_n * span;
    const double step_m = std::log(hi_m / lo_m) / (side - 1);
    const double step_n = std::log(hi_n / lo_n) / (side - 1);
    for (int i = 0; i < side; ++i) {
      const double m = lo_m * std::exp(step_m * i);
      for (int j = 0; j < side; ++j) {
        const double n = lo_n * std::exp(step_n * j);
        const double f = cost_rate_F(m, n, coeffs, costs);
        if (f > best_f) {
          best_f = f;
          best_m = m;
          best_n = n;
        }
      }
    }
    span = std::pow(span, 0.25);
  }
  BandOptimum out;
  out.m_sum = best_m;
  out.n_diff = best_n;
  out.gamma = 0.5 * (best_m + best_n);
  out.eta = 0.5 * (best_m - best_n);
  out.value = best_f;
  out.foc = foc_residual(best_m, best_n, coeffs, costs);
  out.grid_fallback = true;
  return out;
}

}  // namespace

BandOptimum optimize_bands(const CostCoefficients& coeffs,
                           const CostParams& costs) {
  coeffs.validate();
  costs.validate();
  if (costs.epsilon == 0.0 && costs.lambda == 0.0)
    throw std::invalid_argument("optimize_bands: both costs are zero");

  const double C = coeffs.C, R = coeffs.R;
  const double eps = costs.epsilon, lambda = costs.lambda;

  BandOptimum out;
  if (eps == 0.0) {
    // F(m, n->0) = (C/2) m^2 + R lambda / m; the n -> 0 boundary is the
    // supremum (F_n = C n < 0 for n > 0). Proportional-only band.
    const double m = std::cbrt(R * lambda / C);
    out.m_sum = m;
    out.n_diff = 0.0;
    out.gamma = 0.5 * m;
    out.eta = 0.5 * m;
    out.value = 0.5 * C * m * m + R * lambda / m;
    out.boundary_limit = true;
    return out;
  }

  // Upper bracket: the lambda = 0 root; the lambda term only raises the LHS.
  const double n_hi = std::pow(R * eps / C, 0.25);
  double hi = n_hi, lo = n_hi;
  while (scalar_equation(lo, C, R, eps, lambda) > 0) lo *= 0.5;
  for (int it = 0; it < 200 && (hi - lo) > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (scalar_equation(mid, C, R, eps, lambda) > 0)
      hi = mid;
    else
      lo = mid;
  }
  double n = 0.5 * (lo + hi);
  double m = R * eps / (C * n * n * n);

  // Newton polish on the full first-order conditions.
  bool polished = true;
  for (int it = 0; it < 40; ++it) {
    const auto grad = foc_residual(m, n, coeffs, costs);
    const double fee = n * lambda + eps;
    const double h_mm = C + 2.0 * R * fee / (m * m * m * n);
    const double h_mn = R * eps / (m * m * n * n);
    const double h_nn = C + 2.0 * R * eps / (m * n * n * n);
    const double det = h_mm * h_nn - h_mn * h_mn;
    if (det == 0.0 || !std::isfinite(det)) {
      polished = false;
      break;
    }
    const double dm = -(h_nn * grad[0] - h_mn * grad[1]) / det;
    const double dn = -(h_mm * grad[1] - h_mn * grad[0]) / det;
    const double m_next = m + dm;
    const double n_next = n + dn;
    if (!(m_next > 0) || !(n_next > 0)) {
      polished = false;
      break;
    }
    m = m_next;
    n = n_next;
    if (std::abs(dm) <= 1e-15 * m && std::abs(dn) <= 1e-15 * n) break;
  }
  if (!polished) return grid_search_optimum(coeffs, costs, n_hi, n_hi);

  out.m_sum = m;
  out.n_diff = n;
  out.gamma = 0.5 * (m + n);
  out.eta = 0.5 * (m - n);
  out.value = cost_rate_F(m, n, coeffs, costs);
  out.foc = foc_residual(m, n, coeffs, costs);
  return out;
}

double solve_omega(double C, double R) {
  if (C == 0.0) throw std::invalid_argument("solve_omega: requires C != 0");
  if (R == 0.0) throw std::invalid_argument("solve_omega: requires R != 0");
  const double target = R * R;
  auto lhs = [C](double w) {
    const double w4 = w * w * w * w;
    return C * C * w4 * w4 * (w + 1.0);
  };
  double lo = 0.0, hi = 1.0;
  while (lhs(hi) < target) hi *= 2.0;
  for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = lhs(mid);
    if (v == target) return mid;
    if (v > target)
      hi = mid;
    else
      lo = mid;
  }
  double w = 0.5 * (lo + hi);
  for (int it = 0; it < 5; ++it) {  // quadratic finish
    const double w4 = w * w * w * w;
    const double w7 = w4 * w * w * w;
    const double g = C * C * w7 * w * (w + 1.0) - target;
    const double dg = C * C * w7 * (9.0 * w + 8.0);
    if (dg == 0.0) break;
    const double w_next = w - g / dg;
    if (!(w_next > 0)) break;
    w = w_next;
  }
  return w;
}

BalanceSolution asymptotic_bands(double epsilon, const CostCoefficients& coeffs) {
  coeffs.validate();
  if (!(epsilon > 0))
    throw std::invalid_argument("asymptotic_bands: requires epsilon > 0");
  BalanceSolution sol;
  sol.omega = solve_omega(coeffs.C, coeffs.R);
  const double scale = std::pow(epsilon, 0.25);
  sol.n_diff = sol.omega * scale;
  sol.m_sum = coeffs.R / (coeffs.C * sol.omega * sol.omega * sol.omega) * scale;
  sol.gamma = 0.5 * (sol.m_sum + sol.n_diff);
  sol.eta = 0.5 * (sol.m_sum - sol.n_diff);
  return sol;
}

double optimal_band_fixed(double epsilon, const MertonSolution& sol, double z,
                          double t) {
  if (!(epsilon > 0))
    throw std::invalid_argument("optimal_band_fixed: requires epsilon > 0");
  const CostCoefficients coeffs = CostCoefficients::from_merton(sol, z, t);
  if (sol.degenerate_noise(z))
    throw std::domain_error("optimal_band_fixed: a = 0, band undefined");
  const double sigma = sol.market().sigma;
  const double quartic =
      -12.0 * coeffs.a * coeffs.a * coeffs.fz / (sigma * sigma * coeffs.fzz);
  return std::pow(quartic, 0.25) * std::pow(epsilon, 0.25);
}

double drift_shift_fixed(double epsilon, const MertonSolution& sol, double z,
                         double t) {
  if (!(epsilon > 0))
    throw std::invalid_argument("drift_shift_fixed: requires epsilon > 0");
  const CostCoefficients coeffs = CostCoefficients::from_merton(sol, z, t);
  if (sol.degenerate_noise(z))
    throw std::domain_error("drift_shift_fixed: a = 0, band undefined");
  return -2.0 * std::sqrt(coeffs.C * coeffs.R * epsilon);
}

}  // namespace bandlab
