#pragma once

#include <functional>

namespace bandlab {

/// Market model constants: stock drift mu, risk-free rate r, volatility sigma.
struct MarketParams {
  double mu = 0.0;
  double r = 0.0;
  double sigma = 0.0;

  double excess_return() const { return mu - r; }
  void validate() const;
};

/// Power utility U(z) = z^p / p with p < 1, p != 0.
struct CrraUtility {
  double p = 0.0;

  double operator()(double wealth) const;
  void validate() const;
};

/// Closed-form frictionless value function for CRRA utility:
///
///   f0(z,t) = e^{rho (T - t)} z^p / p,
///   rho     = p [ r + (mu - r)^2 / (2 sigma^2 (1 - p)) ].
///
/// Exposes f0 and its derivatives, the optimal stock holding m(z) (linear in
/// z for CRRA, with constant slope m_z), and the displacement noise
/// coefficient a(z) = sigma (1 - m_z) m(z).
class MertonSolution {
 public:
  MertonSolution(MarketParams market, CrraUtility utility, double horizon);

  const MarketParams& market() const { return market_; }
  const CrraUtility& utility() const { return utility_; }
  double horizon() const { return horizon_; }
  double rho() const { return rho_; }

  double value(double z, double t) const;     // f0
  double value_z(double z, double t) const;   // f0_z > 0
  double value_zz(double z, double t) const;  // f0_zz < 0

  double merton_ratio(double z) const;    // m(z) = (mu-r) z / (sigma^2 (1-p))
  double merton_ratio_slope() const;      // m_z, constant
  double noise_coefficient(double z) const;  // a = sigma (1-m_z) m(z)

  /// True when a(z) vanishes up to rounding (mu = r, or m_z = 1); the band
  /// asymptotics are undefined there.
  bool degenerate_noise(double z) const;

 private:
  void check_point(double z, double t) const;

  MarketParams market_;
  CrraUtility utility_;
  double horizon_;
  double rho_;
};

/// Central-difference residual of the frictionless value PDE
///   f_t - (1/2) (mu-r)^2 f_z^2 / (sigma^2 f_zz) + r z f_z
/// for an arbitrary candidate f(z,t). Zero (to truncation error) exactly when
/// f solves the equation. Throws if the f_zz estimate is not negative, since
/// the nonlinear term is then meaningless for a concave value function.
double pde_residual(const std::function<double(double, double)>& f,
                    const MarketParams& market, double z, double t, double h_z,
                    double h_t);

/// Same residual for the closed-form solution.
double pde_residual(const MertonSolution& sol, double z, double t, double h_z,
                    double h_t);

}  // namespace bandlab
