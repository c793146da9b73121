#include "bandlab/market.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bandlab {

void MarketParams::validate() const {
  if (!std::isfinite(mu) || !std::isfinite(r) || !std::isfinite(sigma))
    throw std::invalid_argument("market: mu, r, sigma must be finite");
  if (!(sigma > 0)) throw std::invalid_argument("market.sigma: requires sigma > 0");
}

void CrraUtility::validate() const {
  if (!std::isfinite(p) || !(p < 1) || p == 0)
    throw std::invalid_argument("utility.p: requires p < 1 and p != 0");
}

double CrraUtility::operator()(double wealth) const {
  if (!(wealth > 0))
    throw std::domain_error("utility: wealth must be positive");
  return std::pow(wealth, p) / p;
}

MertonSolution::MertonSolution(MarketParams market, CrraUtility utility,
                               double horizon)
    : market_(market), utility_(utility), horizon_(horizon) {
  market_.validate();
  utility_.validate();
  if (!(horizon_ > 0) || !std::isfinite(horizon_))
    throw std::invalid_argument("horizon: requires T > 0");
  const double ex = market_.excess_return();
  rho_ = utility_.p *
         (market_.r + ex * ex / (2.0 * market_.sigma * market_.sigma *
                                 (1.0 - utility_.p)));
}

void MertonSolution::check_point(double z, double t) const {
  if (!(z > 0)) throw std::domain_error("merton: wealth must be positive");
  if (t > horizon_ + 1e-12 * std::max(1.0, horizon_))
    throw std::domain_error("merton: t beyond horizon");
}

double MertonSolution::value(double z, double t) const {
  check_point(z, t);
  return std::exp(rho_ * (horizon_ - t)) * std::pow(z, utility_.p) / utility_.p;
}

double MertonSolution::value_z(double z, double t) const {
  check_point(z, t);
  return std::exp(rho_ * (horizon_ - t)) * std::pow(z, utility_.p - 1.0);
}

double MertonSolution::value_zz(double z, double t) const {
  check_point(z, t);
  return std::exp(rho_ * (horizon_ - t)) * (utility_.p - 1.0) *
         std::pow(z, utility_.p - 2.0);
}

double MertonSolution::merton_ratio(double z) const {
  if (!(z > 0)) throw std::domain_error("merton: wealth must be positive");
  return merton_ratio_slope() * z;
}

double MertonSolution::merton_ratio_slope() const {
  return market_.excess_return() /
         (market_.sigma * market_.sigma * (1.0 - utility_.p));
}

double MertonSolution::noise_coefficient(double z) const {
  return market_.sigma * (1.0 - merton_ratio_slope()) * merton_ratio(z);
}

bool MertonSolution::degenerate_noise(double z) const {
  return std::abs(noise_coefficient(z)) <= 1e-10 * market_.sigma * z;
}

double pde_residual(const std::function<double(double, double)>& f,
                    const MarketParams& market, double z, double t, double h_z,
                    double h_t) {
  market.validate();
  if (!(z > 0)) throw std::domain_error("pde_residual: wealth must be positive");
  if (!(h_z > 0) || !(h_t > 0) || h_z >= z)
    throw std::invalid_argument("pde_residual: degenerate step sizes");

  const double f_t = (f(z, t + h_t) - f(z, t - h_t)) / (2.0 * h_t);
  const double f_hi = f(z + h_z, t);
  const double f_lo = f(z - h_z, t);
  const double f_mid = f(z, t);
  const double f_z = (f_hi - f_lo) / (2.0 * h_z);
  const double f_zz = (f_hi - 2.0 * f_mid + f_lo) / (h_z * h_z);
  if (!(f_zz < 0))
    throw std::domain_error("pde_residual: f_zz estimate is not negative");

  const double ex = market.excess_return();
  return f_t - 0.5 * ex * ex * f_z * f_z / (market.sigma * market.sigma * f_zz) +
         market.r * z * f_z;
}

double pde_residual(const MertonSolution& sol, double z, double t, double h_z,
                    double h_t) {
  return pde_residual(
      [&sol](double zz, double tt) { return sol.value(zz, tt); }, sol.market(),
      z, t, h_z, h_t);
}

}  // namespace bandlab
