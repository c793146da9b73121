#include "bandlab/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bandlab/band_policy.hpp"

namespace bandlab {

double f4_eval(double xi, const QuarticCoeffs& coeffs) {
  if (!(coeffs.a2 > 0)) throw std::invalid_argument("f4: requires a2 > 0");
  const double xi2 = xi * xi;
  return -(2.0 / coeffs.a2) * (coeffs.D + coeffs.c1 * xi + 0.5 * coeffs.K * xi2 +
                               coeffs.B / 12.0 * xi2 * xi2);
}

double f4_slope(double xi, const QuarticCoeffs& coeffs) {
  if (!(coeffs.a2 > 0)) throw std::invalid_argument("f4: requires a2 > 0");
  return -(2.0 / coeffs.a2) *
         (coeffs.c1 + coeffs.K * xi + coeffs.B / 3.0 * xi * xi * xi);
}

namespace {

struct System {
  double B, a2, fz0, scale;  // scale = analytic band width, fixes slope units

  double phi_slope(double xi, const double* x) const {
    const double c1 = x[4], K = x[5];
    return c1 + K * xi + B / 3.0 * xi * xi * xi;
  }
  double phi(double xi, const double* x) const {
    const double c1 = x[4], K = x[5];
    const double xi2 = xi * xi;
    return c1 * xi + 0.5 * K * xi2 + B / 12.0 * xi2 * xi2;
  }
  double phi_curv(double xi, const double* x) const {
    return x[5] + B * xi * xi;
  }

  // x = (gamma, beta, eta, theta, c1, K)
  std::array<double, 6> residual(const double* x) const {
    const double g = x[0], b = x[1], e = x[2], th = x[3];
    const double inv = -2.0 / (a2 * fz0);
    std::array<double, 6> r;
    r[0] = inv * (phi(g, x) - phi(e, x)) + 1.0;
    r[1] = inv * (phi(-b, x) - phi(-th, x)) + 1.0;
    r[2] = inv * scale * phi_slope(g, x);
    r[3] = inv * scale * phi_slope(-b, x);
    r[4] = inv * scale * phi_slope(e, x);
    r[5] = inv * scale * phi_slope(-th, x);
    return r;
  }

  void jacobian(const double* x, double jac[6][6]) const {
    const double g = x[0], b = x[1], e = x[2], th = x[3];
    const double inv = -2.0 / (a2 * fz0);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) jac[i][j] = 0.0;
    // value matching, upper trade
    jac[0][0] = inv * phi_slope(g, x);
    jac[0][2] = -inv * phi_slope(e, x);
    jac[0][4] = inv * (g - e);
    jac[0][5] = inv * 0.5 * (g * g - e * e);
    // value matching, lower trade
    jac[1][1] = -inv * phi_slope(-b, x);
    jac[1][3] = inv * phi_slope(-th, x);
    jac[1][4] = inv * (-b + th);
    jac[1][5] = inv * 0.5 * (b * b - th * th);
    // smooth pasting at gamma, -beta, eta, -theta
    jac[2][0] = inv * scale * phi_curv(g, x);
    jac[2][4] = inv * scale;
    jac[2][5] = inv * scale * g;
    jac[3][1] = -inv * scale * phi_curv(-b, x);
    jac[3][4] = inv * scale;
    jac[3][5] = inv * scale * (-b);
    jac[4][2] = inv * scale * phi_curv(e, x);
    jac[4][4] = inv * scale;
    jac[4][5] = inv * scale * e;
    jac[5][3] = -inv * scale * phi_curv(-th, x);
    jac[5][4] = inv * scale;
    jac[5][5] = inv * scale * (-th);
  }
};

double norm_inf(const std::array<double, 6>& v) {
  double out = 0.0;
  for (double x : v) out = std::max(out, std::abs(x));
  return out;
}

// Gaussian elimination with partial pivoting; 6x6 only.
bool solve_linear6(double a[6][6], double b[6]) {
  for (int col = 0; col < 6; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 6; ++row)
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    if (a[pivot][col] == 0.0) return false;
    if (pivot != col) {
      for (int j = 0; j < 6; ++j) std::swap(a[pivot][j], a[col][j]);
      std::swap(b[pivot], b[col]);
    }
    for (int row = col + 1; row < 6; ++row) {
      const double factor = a[row][col] / a[col][col];
      for (int j = col; j < 6; ++j) a[row][j] -= factor * a[col][j];
      b[row] -= factor * b[col];
    }
  }
  for (int row = 5; row >= 0; --row) {
    double sum = b[row];
    for (int j = row + 1; j < 6; ++j) sum -= a[row][j] * b[j];
    if (a[row][row] == 0.0) return false;
    b[row] = sum / a[row][row];
  }
  return true;
}

// Damped Newton on the scaled residual map. Returns true on convergence.
bool newton(const System& sys, double x[6], int& iterations) {
  auto merit = [&sys](const double* v) {
    const auto r = sys.residual(v);
    double s = 0.0;
    for (double e : r) s += e * e;
    return s;
  };
  for (iterations = 0; iterations < 200; ++iterations) {
    const auto res = sys.residual(x);
    if (norm_inf(res) < 1e-13) return true;
    double jac[6][6];
    double step[6];
    sys.jacobian(x, jac);
    for (int i = 0; i < 6; ++i) step[i] = -res[i];
    if (!solve_linear6(jac, step)) return false;
    const double f0 = merit(x);
    double t = 1.0;
    bool moved = false;
    while (t >= 1e-8) {
      double trial[6];
      for (int i = 0; i < 6; ++i) trial[i] = x[i] + t * step[i];
      // Project destinations back toward the admissible band: they may graze
      // zero (the solution sits there) but not run off to the mirror roots
      // with a destination outside the band.
      if (trial[0] > 0 && trial[1] > 0) {
        trial[2] = std::clamp(trial[2], -0.05 * trial[0], 0.95 * trial[0]);
        trial[3] = std::clamp(trial[3], -0.05 * trial[1], 0.95 * trial[1]);
        if (merit(trial) < f0 * (1.0 - 1e-4 * t)) {
          std::copy(trial, trial + 6, x);
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) return false;
  }
  return norm_inf(sys.residual(x)) < 1e-13;
}

FreeBoundarySolution finish(const System& sys, double x[6], int iterations,
                            bool restarted) {
  FreeBoundarySolution sol;
  sol.gamma = x[0];
  sol.beta = x[1];
  sol.eta = std::abs(x[2]) < 1e-9 * x[0] ? 0.0 : x[2];
  sol.theta = std::abs(x[3]) < 1e-9 * x[1] ? 0.0 : x[3];
  sol.c1 = x[4];
  sol.K = x[5];
  sol.iterations = iterations;
  sol.restarted = restarted;
  double clean[6] = {sol.gamma, sol.beta, sol.eta, sol.theta, sol.c1, sol.K};
  sol.residual_norm = norm_inf(sys.residual(clean));
  if (!(sol.eta >= 0) || !(sol.eta < sol.gamma) || !(sol.theta >= 0) ||
      !(sol.theta < sol.beta))
    throw std::runtime_error(
        "free_boundary: converged to an invalid band (gamma=" +
        std::to_string(sol.gamma) + ", beta=" + std::to_string(sol.beta) +
        ", eta=" + std::to_string(sol.eta) +
        ", theta=" + std::to_string(sol.theta) + ")");
  return sol;
}

FreeBoundarySolution solve(double B, double a2, double fz0, const double* start) {
  if (!(a2 > 0)) throw std::invalid_argument("free_boundary: requires a2 > 0");
  if (!(B < 0))
    throw std::domain_error("free_boundary: requires B < 0 (concavity)");
  if (!(fz0 > 0))
    throw std::domain_error("free_boundary: requires fz0 > 0 (band degenerates)");

  const double scale = std::pow(-6.0 * a2 * fz0 / B, 0.25);
  const System sys{B, a2, fz0, scale};

  // The raw six-equation system also has mirror roots with a destination
  // outside the band (e.g. theta = -gamma); only the admissible band counts
  // as converged. Anything else is treated as a stall.
  auto admissible = [](const double* v) {
    return v[2] < v[0] && v[3] < v[1] && v[2] > -1e-6 * v[0] &&
           v[3] > -1e-6 * v[1];
  };

  double x[6];
  std::copy(start, start + 6, x);
  int iterations = 0;
  if (newton(sys, x, iterations) && admissible(x))
    return finish(sys, x, iterations, false);

  // Restart from the analytic symmetric solution.
  double x2[6] = {scale, scale, 0.0, 0.0, 0.0, -B * scale * scale / 3.0};
  int more = 0;
  if (!newton(sys, x2, more))
    throw std::runtime_error("free_boundary: Newton failed to converge");
  return finish(sys, x2, iterations + more, true);
}

}  // namespace

FreeBoundarySolution solve_free_boundary(double B, double a2, double fz0) {
  if (!(a2 > 0)) throw std::invalid_argument("free_boundary: requires a2 > 0");
  if (!(B < 0))
    throw std::domain_error("free_boundary: requires B < 0 (concavity)");
  if (!(fz0 > 0))
    throw std::domain_error("free_boundary: requires fz0 > 0 (band degenerates)");
  const double s = std::pow(-6.0 * a2 * fz0 / B, 0.25);
  // Deliberately generic, asymmetric start.
  const double start[6] = {1.4 * s,  0.7 * s, 0.3 * s,
                           0.45 * s, 0.0,     -0.8 * B * s * s / 3.0};
  return solve(B, a2, fz0, start);
}

FreeBoundarySolution solve_free_boundary(double B, double a2, double fz0,
                                         const std::array<double, 6>& start) {
  return solve(B, a2, fz0, start.data());
}

std::array<double, 6> free_boundary_residuals(const FreeBoundarySolution& sol,
                                              double B, double a2, double fz0) {
  const double scale = std::pow(-6.0 * a2 * fz0 / B, 0.25);
  const System sys{B, a2, fz0, scale};
  const double x[6] = {sol.gamma, sol.beta, sol.eta, sol.theta, sol.c1, sol.K};
  return sys.residual(x);
}

ExpansionReport expansion_consistency(const MertonSolution& sol, double z,
                                      double t) {
  const double a = sol.noise_coefficient(z);
  if (sol.degenerate_noise(z))
    throw std::domain_error("expansion_consistency: a = 0, band undefined");
  const double sigma = sol.market().sigma;
  const double B = 0.5 * sigma * sigma * sol.value_zz(z, t);
  const double fz0 = sol.value_z(z, t);

  ExpansionReport report;
  report.solution = solve_free_boundary(B, a * a, fz0);
  report.band_prefactor = report.solution.gamma;
  report.closed_form_prefactor = optimal_band_fixed(1.0, sol, z, t);
  report.rel_mismatch =
      std::abs(report.band_prefactor - report.closed_form_prefactor) /
      report.closed_form_prefactor;
  return report;
}

}  // namespace bandlab
