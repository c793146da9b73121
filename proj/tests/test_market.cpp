#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "bandlab/market.hpp"
#include "bandlab/stats.hpp"
#include "test_support.hpp"

using namespace bandlab;

TEST_CASE("terminal condition recovers the utility") {
  const MertonSolution sol(MarketParams{0.1, 0.02, 0.2}, CrraUtility{0.5}, 1.0);
  CHECK(sol.value(1.0, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  for (double z : {0.25, 0.7, 1.9, 6.0})
    CHECK(sol.value(z, 1.0) ==
          doctest::Approx(CrraUtility{0.5}(z)).epsilon(1e-14));
}

TEST_CASE("zero excess return grows like the bond") {
  const MertonSolution sol(MarketParams{0.02, 0.02, 0.3}, CrraUtility{-2.0}, 2.0);
  const double z = 1.3, t = 1.3, tau = 2.0 - t;
  const CrraUtility utility{-2.0};
  CHECK(sol.value(z, t) ==
        doctest::Approx(utility(z * std::exp(0.02 * tau))).epsilon(1e-13));
}

TEST_CASE("closed form at the reference point") {
  const MertonSolution sol = testsup::reference_merton();
  // rho = p [r + (mu-r)^2 / (2 sigma^2 (1-p))] = -3 (0.02 + 0.02) = -0.12
  CHECK(sol.rho() == doctest::Approx(-0.12).epsilon(1e-14));
  // f0(1, T-1) = e^{-0.12} / (-3)
  CHECK(sol.value(1.0, 0.0) ==
        doctest::Approx(-std::exp(-0.12) / 3.0).epsilon(1e-14));
  CHECK(sol.value(1.0, 0.0) == doctest::Approx(-0.29564).epsilon(1e-4));
  // rho formula is verified, not trusted: PDE residual of the closed form.
  CHECK(std::abs(pde_residual(sol, 1.0, 0.0, 1e-4, 1e-4)) < 1e-8);
}

TEST_CASE("merton ratio") {
  const MertonSolution sol = testsup::reference_merton();
  CHECK(sol.merton_ratio(2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sol.merton_ratio_slope() == doctest::Approx(0.5).epsilon(1e-14));

  const MertonSolution flat(MarketParams{0.02, 0.02, 0.2}, CrraUtility{-3.0}, 1.0);
  CHECK(flat.merton_ratio(5.0) == 0.0);

  // Linear in z, and the slope matches finite differences of m.
  PathRng rng(7, 0);
  for (int i = 0; i < 20; ++i) {
    const double z = testsup::uniform_in(rng, 0.1, 5.0);
    const double c = testsup::uniform_in(rng, 0.2, 4.0);
    CHECK(sol.merton_ratio(c * z) ==
          doctest::Approx(c * sol.merton_ratio(z)).epsilon(1e-13));
    const double h = 1e-6 * z;
    const double fd =
        (sol.merton_ratio(z + h) - sol.merton_ratio(z - h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(sol.merton_ratio_slope()).epsilon(1e-9));
  }

  // m agrees with its defining ratio -(mu-r) f_z / (sigma^2 f_zz).
  const double z = 1.7, t = 0.4;
  const double direct = -(0.1 - 0.02) * sol.value_z(z, t) /
                        (0.2 * 0.2 * sol.value_zz(z, t));
  CHECK(sol.merton_ratio(z) == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("noise coefficient") {
  const MertonSolution sol = testsup::reference_merton();
  CHECK(sol.noise_coefficient(1.0) == doctest::Approx(0.05).epsilon(1e-14));

  const MertonSolution flat(MarketParams{0.05, 0.05, 0.2}, CrraUtility{-3.0}, 1.0);
  CHECK(flat.noise_coefficient(1.0) == 0.0);

  // m_z = 1 degeneracy: p = -1 with these numbers gives a = 0.
  const MertonSolution degen(MarketParams{0.1, 0.02, 0.2}, CrraUtility{-1.0}, 1.0);
  CHECK(degen.merton_ratio_slope() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(degen.noise_coefficient(1.0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("pde residual detects solutions and non-solutions") {
  const MertonSolution sol = testsup::reference_merton();
  CHECK(std::abs(pde_residual(sol, 1.0, 0.0, 1e-4, 1e-4)) < 1e-6);

  // Terminal slice is exact.
  const CrraUtility utility{-3.0};
  for (double z : {0.5, 1.0, 2.5})
    CHECK(sol.value(z, 1.0) == doctest::Approx(utility(z)).epsilon(1e-15));

  // A 1% multiplicative perturbation is flagged: its residual sits orders of
  // magnitude above the closed form's discretization floor everywhere, and
  // past 1e-3 where the perturbation has any bite (small z).
  auto perturbed = [&sol](double z, double t) {
    return sol.value(z, t) * (1.0 + 0.01 * z);
  };
  CHECK(std::abs(pde_residual(perturbed, sol.market(), 0.25, 0.0, 2.5e-5, 1e-4)) >
        1e-3);
  const double at_solution = std::abs(pde_residual(sol, 1.0, 0.0, 1e-4, 1e-4));
  const double at_perturbed =
      std::abs(pde_residual(perturbed, sol.market(), 1.0, 0.0, 1e-4, 1e-4));
  CHECK(at_perturbed > 500.0 * at_solution);
}

TEST_CASE("pde residual shrinks at second order") {
  const MertonSolution sol = testsup::reference_merton();
  std::vector<double> log_h, log_res;
  for (double h : {8e-3, 4e-3, 2e-3, 1e-3}) {
    const double res = std::abs(pde_residual(sol, 1.0, 0.0, h, h));
    log_h.push_back(std::log(h));
    log_res.push_back(std::log(res));
  }
  const LineFit fit = fit_line(log_h, log_res);
  CHECK(fit.slope >= 1.9);
}

TEST_CASE("value function signs and homogeneity") {
  const MertonSolution sol = testsup::reference_merton();
  PathRng rng(11, 0);
  for (int i = 0; i < 50; ++i) {
    const double z = testsup::uniform_in(rng, 0.05, 8.0);
    const double t = testsup::uniform_in(rng, 0.0, 1.0);
    CHECK(sol.value_z(z, t) > 0);
    CHECK(sol.value_zz(z, t) < 0);
    const double c = testsup::uniform_in(rng, 0.3, 3.0);
    CHECK(sol.value(c * z, t) ==
          doctest::Approx(std::pow(c, -3.0) * sol.value(z, t)).epsilon(1e-12));
  }
}

TEST_CASE("domain errors") {
  const MertonSolution sol = testsup::reference_merton();
  CHECK_THROWS_AS(sol.value(0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(sol.value(-1.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(sol.value(1.0, 1.5), std::domain_error);
  CHECK_THROWS_AS(sol.merton_ratio(0.0), std::domain_error);

  CHECK_THROWS_AS(MertonSolution(MarketParams{0.1, 0.02, 0.0},
                                 CrraUtility{-3.0}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(MertonSolution(MarketParams{0.1, 0.02, 0.2},
                                 CrraUtility{0.0}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(MertonSolution(MarketParams{0.1, 0.02, 0.2},
                                 CrraUtility{1.0}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(MertonSolution(MarketParams{0.1, 0.02, 0.2},
                                 CrraUtility{-3.0}, 0.0),
                  std::invalid_argument);

  CHECK_THROWS_AS(pde_residual(sol, 1.0, 0.0, 0.0, 1e-4), std::invalid_argument);
  CHECK_THROWS_AS(pde_residual(sol, 1.0, 0.0, 1e-4, 0.0), std::invalid_argument);

  // Convex candidate: the f_zz estimate has the wrong sign.
  auto convex = [](double z, double t) { return z * z + t; };
  CHECK_THROWS_AS(pde_residual(convex, sol.market(), 1.0, 0.0, 1e-4, 1e-4),
                  std::domain_error);
}
