#pragma once

#include <array>

#include "bandlab/market.hpp"

namespace bandlab {

/// Transaction cost model: fixed fee epsilon (dollars per trade) and
/// proportional fee lambda (fraction of the traded amount).
struct CostParams {
  double epsilon = 0.0;
  double lambda = 0.0;

  void validate() const;
  bool frictionless() const { return epsilon == 0.0 && lambda == 0.0; }
};

/// Impulse policy: hold while the displacement xi = X - m(Z,t) stays in
/// (-beta, gamma); on touching +gamma sell down to xi = eta, on touching
/// -beta buy up to xi = -theta.
struct BandPolicy {
  double gamma = 0.0;
  double beta = 0.0;
  double eta = 0.0;
  double theta = 0.0;

  static BandPolicy symmetric(double gamma, double eta);
  void validate() const;
};

/// Reduced constants of the leading-order cost rate
///   E[df0]/dt ~ (C/2)(m^2+n^2) + (R/(mn)) (n lambda + epsilon),
/// with m = gamma+eta, n = gamma-eta. C = sigma^2 f0_zz / 12 and
/// R = -f0_z a^2; both are negative at a valid Merton point.
struct CostCoefficients {
  double C = 0.0;
  double R = 0.0;
  double a = 0.0;
  double fz = 0.0;
  double fzz = 0.0;

  static CostCoefficients from_merton(const MertonSolution& sol, double z,
                                      double t);
  void validate() const;
};

/// Equilibrium density of the displacement under a symmetric (gamma, eta)
/// band: constant on |xi| <= eta, decaying linearly to zero at |xi| = gamma.
class HoldDensity {
 public:
  HoldDensity(double gamma, double eta);

  double gamma() const { return gamma_; }
  double eta() const { return eta_; }
  double pdf(double xi) const;
  double cdf(double xi) const;
  double quantile(double u) const;  // inverse CDF, u in [0, 1]
  double second_moment() const;  // (gamma^2 + eta^2) / 6

 private:
  double gamma_;
  double eta_;
};

/// Expected boundary hits per unit time for one boundary: a^2 / (2 (g^2-e^2)).
double hit_rate(double a, double gamma, double eta);

/// Leading-order drift of f0 per unit time in band variables m = gamma+eta,
/// n = gamma-eta. Negative for valid coefficients: costs only hurt.
double cost_rate_F(double m_sum, double n_diff, const CostCoefficients& coeffs,
                   const CostParams& costs);

/// Gradient (F_m, F_n) of the cost rate.
std::array<double, 2> foc_residual(double m_sum, double n_diff,
                                   const CostCoefficients& coeffs,
                                   const CostParams& costs);

/// Output of the band optimizer, in both (m,n) and (gamma,eta) coordinates.
/// For epsilon = 0 the supremum sits on the n -> 0 boundary (continuous
/// proportional-cost trading); gamma == eta there, so policy() refuses to
/// build a BandPolicy for that degenerate limit.
struct BandOptimum {
  double m_sum = 0.0;
  double n_diff = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
  double value = 0.0;
  std::array<double, 2> foc{0.0, 0.0};
  bool boundary_limit = false;  // epsilon == 0 case
  bool grid_fallback = false;

  BandPolicy policy() const;
};

/// Maximizes the cost rate F over m, n > 0. The stationarity system reduces
/// to a monotone scalar equation in n; a certified bisection bracket seeds a
/// Newton polish on the full first-order conditions, with a log-grid search
/// fallback if the polish leaves the positive quadrant.
BandOptimum optimize_bands(const CostCoefficients& coeffs,
                           const CostParams& costs);

/// Unique positive root of C^2 w^8 (w+1) = R^2 (bisection + Newton polish).
double solve_omega(double C, double R);

/// Band geometry under the balanced coupling lambda = epsilon^{3/4}.
struct BalanceSolution {
  double omega = 0.0;
  double m_sum = 0.0;
  double n_diff = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
};

BalanceSolution asymptotic_bands(double epsilon, const CostCoefficients& coeffs);

/// Fixed-cost-only optimal half-width:
///   gamma = (-12 a^2 f0_z / (sigma^2 f0_zz))^{1/4} epsilon^{1/4}.
double optimal_band_fixed(double epsilon, const MertonSolution& sol, double z,
                          double t);

/// Value drift at the fixed-cost optimum, -2 sqrt(C R epsilon); strictly
/// negative, scaling like epsilon^{1/2}.
double drift_shift_fixed(double epsilon, const MertonSolution& sol, double z,
                         double t);

}  // namespace bandlab
