#pragma once

#include <array>

#include "bandlab/market.hpp"

namespace bandlab {

/// Coefficients of the integrated quartic profile
///   0 = D + c1 xi + (K/2) xi^2 + (B/12) xi^4 + (a2/2) f4(xi),
/// i.e. f4(xi) = -(2/a2) (D + c1 xi + (K/2) xi^2 + (B/12) xi^4).
struct QuarticCoeffs {
  double K = 0.0;
  double B = 0.0;
  double c1 = 0.0;
  double D = 0.0;
  double a2 = 0.0;
};

double f4_eval(double xi, const QuarticCoeffs& coeffs);
double f4_slope(double xi, const QuarticCoeffs& coeffs);

/// Solution of the six-equation free-boundary system: value matching across
/// both trades plus vanishing f4 slope at the four band points, in the
/// unknowns (gamma, beta, eta, theta, c1, K) with D normalized to zero.
struct FreeBoundarySolution {
  double gamma = 0.0;
  double beta = 0.0;
  double eta = 0.0;
  double theta = 0.0;
  double c1 = 0.0;
  double K = 0.0;
  double residual_norm = 0.0;  // max |equation|, scaled by fz0
  int iterations = 0;
  bool restarted = false;  // fell back to the symmetric analytic start

  QuarticCoeffs quartic(double B, double a2) const {
    return QuarticCoeffs{K, B, c1, 0.0, a2};
  }
};

/// Solves the free-boundary system by damped Newton with an analytic
/// Jacobian. The unique solution is the symmetric band
///   gamma = beta = (-6 a2 fz0 / B)^{1/4},  eta = theta = c1 = 0,
///   K = -B gamma^2 / 3;
/// the solver finds it from a generic start (or a caller-supplied one) and
/// restarts from the analytic point if Newton stalls.
FreeBoundarySolution solve_free_boundary(double B, double a2, double fz0);
FreeBoundarySolution solve_free_boundary(double B, double a2, double fz0,
                                         const std::array<double, 6>& start);

/// Scaled residuals of the six conditions at a candidate solution
/// (units of fz0; slope equations carry the band length scale).
std::array<double, 6> free_boundary_residuals(const FreeBoundarySolution& sol,
                                              double B, double a2, double fz0);

/// Cross-module consistency: assemble (B, a2, fz0) at a Merton point, solve
/// the free-boundary system, and compare the recovered band prefactor (the
/// rescaled gamma, which multiplies epsilon^{1/4} in dollar units) against
/// the closed-form fixed-cost band.
struct ExpansionReport {
  FreeBoundarySolution solution;
  double band_prefactor = 0.0;        // gamma from the free-boundary solve
  double closed_form_prefactor = 0.0; // optimal_band_fixed at epsilon = 1
  double rel_mismatch = 0.0;
};

ExpansionReport expansion_consistency(const MertonSolution& sol, double z,
                                      double t);

}  // namespace bandlab
