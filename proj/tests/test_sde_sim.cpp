#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "bandlab/experiments.hpp"
#include "bandlab/sde_sim.hpp"
#include "bandlab/stats.hpp"
#include "test_support.hpp"

using namespace bandlab;

namespace {

PathState make_state(double X, double Z, double m_z, double t = 0.0) {
  PathState st;
  st.t = t;
  st.X = X;
  st.Z = Z;
  st.Y = Z - X;
  st.xi = X - m_z * Z;
  return st;
}

struct CsvRow {
  double t, X, Y, Z, xi;
  std::string event;
};

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::vector<CsvRow> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  REQUIRE(line == "t,X,Y,Z,xi,event");
  while (std::getline(in, line)) {
    CsvRow row;
    std::istringstream fields(line);
    std::string field;
    std::getline(fields, field, ',');
    row.t = std::stod(field);
    std::getline(fields, field, ',');
    row.X = std::stod(field);
    std::getline(fields, field, ',');
    row.Y = std::stod(field);
    std::getline(fields, field, ',');
    row.Z = std::stod(field);
    std::getline(fields, field, ',');
    row.xi = std::stod(field);
    std::getline(fields, row.event);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("gbm step closed forms") {
  const double m_z = 0.5;
  PathState st = make_state(0.6, 1.0, m_z);

  SUBCASE("zero volatility grows deterministically") {
    const PathState next = gbm_step(st, 0.25, 1.7, MarketParams{0.1, 0.02, 0.0}, m_z);
    CHECK(next.X == doctest::Approx(0.6 * std::exp(0.1 * 0.25)).epsilon(1e-15));
    CHECK(next.Y == doctest::Approx(0.4 * std::exp(0.02 * 0.25)).epsilon(1e-15));
    CHECK(next.Z == doctest::Approx(next.X + next.Y).epsilon(1e-15));
  }

  SUBCASE("identity dynamics") {
    const PathState next = gbm_step(st, 0.25, -0.3, MarketParams{0.0, 0.0, 0.0}, m_z);
    CHECK(next.X == st.X);
    CHECK(next.Y == st.Y);
    CHECK(next.Z == st.Z);
  }

  SUBCASE("one-step log moments match the scheme") {
    const MarketParams market{0.1, 0.02, 0.2};
    const double dt = 0.01;
    PathRng rng(42, 0);
    MeanVar acc;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const PathState next = gbm_step(st, dt, rng.normal(), market, m_z);
      acc.add(std::log(next.X / st.X));
    }
    const double mean_exact = (0.1 - 0.5 * 0.04) * dt;
    const double var_exact = 0.04 * dt;
    CHECK(std::abs(acc.mean - mean_exact) <
          3.0 * std::sqrt(var_exact / n));
    CHECK(std::abs(acc.variance() - var_exact) <
          3.0 * var_exact * std::sqrt(2.0 / n));
  }
}

TEST_CASE("rebalance bookkeeping") {
  const double m_z = 0.5;

  SUBCASE("frictionless transfer") {
    PathState st = make_state(0.7, 1.0, m_z);  // xi = 0.2
    auto [next, event] = rebalance_to_target(st, 0.05, CostParams{0.0, 0.0}, m_z);
    CHECK(event.side == TradeSide::sell);
    CHECK(event.gross == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(next.Z == st.Z);
    CHECK(next.xi == doctest::Approx(0.05).epsilon(1e-14));
  }

  SUBCASE("fixed cost only: wealth drops by epsilon, xi lands on target") {
    PathState st = make_state(0.7, 1.0, m_z);
    const CostParams costs{1e-3, 0.0};
    auto [next, event] = rebalance_to_target(st, 0.05, costs, m_z);
    CHECK(next.Z == st.Z - 1e-3);  // exact: Z' = Z - lambda g - eps with lambda=0
    CHECK(std::abs(next.xi - 0.05) <= 1e-12 * (1.0 + std::abs(next.Z)));
  }

  SUBCASE("sell with proportional cost: exact identities") {
    PathState st = make_state(0.7, 1.0, m_z);
    const CostParams costs{1e-3, 5e-3};
    auto [next, event] = rebalance_to_target(st, 0.05, costs, m_z);
    const double g = event.gross;
    // X loses exactly g; Z drops exactly by lambda g + eps.
    CHECK(next.X == st.X - g);
    CHECK(next.Z == st.Z - costs.lambda * g - costs.epsilon);
    // Y gains (1-lambda) g - eps, up to the one rounding of the derived leg.
    CHECK(next.Y ==
          doctest::Approx(st.Y + (1.0 - costs.lambda) * g - costs.epsilon)
              .epsilon(1e-14));
    CHECK(std::abs(next.xi - 0.05) <= 1e-12 * (1.0 + std::abs(next.Z)));
    CHECK(next.X + next.Y == doctest::Approx(next.Z).epsilon(1e-15));
  }

  SUBCASE("buy with proportional cost") {
    PathState st = make_state(0.3, 1.0, m_z);  // xi = -0.2
    const CostParams costs{1e-3, 5e-3};
    auto [next, event] = rebalance_to_target(st, -0.05, costs, m_z);
    CHECK(event.side == TradeSide::buy);
    const double g = event.gross;
    CHECK(next.Y == st.Y - g);
    CHECK(next.Z == st.Z - costs.lambda * g - costs.epsilon);
    CHECK(std::abs(next.xi - (-0.05)) <= 1e-12 * (1.0 + std::abs(next.Z)));
  }

  SUBCASE("degenerate and infeasible trades") {
    PathState st = make_state(0.7, 1.0, m_z);
    CHECK_THROWS_AS(rebalance_to_target(st, st.xi, CostParams{1e-3, 0.0}, m_z),
                    std::invalid_argument);
    CHECK_THROWS_AS(rebalance_to_target(st, 0.05, CostParams{2.0, 0.0}, m_z),
                    std::domain_error);
  }
}

TEST_CASE("no trades when the displacement never moves") {
  // mu = r makes m = 0; starting at xi0 = 0 keeps X = 0 forever.
  const MertonSolution sol(MarketParams{0.05, 0.05, 0.2}, CrraUtility{-3.0}, 1.0);
  SimConfig cfg(sol, CostParams{1e-3, 0.0},
                BandSource::fixed_policy(BandPolicy::symmetric(0.05, 0.0)), 1e-2,
                4, 99, 1.0);
  for (long i = 0; i < cfg.n_paths; ++i) {
    const PathRecord rec = simulate_path(cfg, i);
    CHECK(rec.n_trades == 0);
    CHECK(!rec.bankrupt);
  }
}

TEST_CASE("thread count honors the environment cap") {
  setenv("BANDLAB_THREADS", "1", 1);
  CHECK(effective_thread_count(8) == 1);
  setenv("BANDLAB_THREADS", "2", 1);
  CHECK(effective_thread_count(8) == 2);
  CHECK(effective_thread_count(1) == 1);
  unsetenv("BANDLAB_THREADS");
}

TEST_CASE("determinism across worker counts") {
  const MertonSolution sol = testsup::reference_merton();
  SimConfig cfg(sol, CostParams{1e-4, 0.0}, BandSource::merton_scaled(), 2e-3,
                500, 1234, 1.0);
  cfg.options.record_trades = true;

  setenv("BANDLAB_THREADS", "1", 1);
  const auto serial = simulate_all(cfg);
  setenv("BANDLAB_THREADS", "2", 1);
  const auto parallel = simulate_all(cfg);
  unsetenv("BANDLAB_THREADS");

  REQUIRE(serial.size() == parallel.size());
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].terminal_z == parallel[i].terminal_z);  // bit identical
    CHECK(serial[i].utility == parallel[i].utility);
    CHECK(serial[i].n_trades == parallel[i].n_trades);
    CHECK(serial[i].total_gross == parallel[i].total_gross);
  }

  // And simulate_path reproduces the same records one by one.
  const PathRecord single = simulate_path(cfg, 42);
  CHECK(single.terminal_z == serial[42].terminal_z);
  CHECK(single.n_trades == serial[42].n_trades);
}

TEST_CASE("frictionless tight-band control matches the Merton value") {
  const MertonSolution sol = testsup::reference_merton();
  SimConfig cfg(sol, CostParams{0.0, 0.0}, BandSource::wealth_fraction_of(1e-4),
                5e-3, 100000, 777, 1.0);
  const auto records = simulate_all(cfg);
  MeanVar acc;
  for (const auto& rec : records) acc.add(rec.utility);
  const double exact = sol.value(1.0, 0.0);
  CHECK(std::abs(acc.mean - exact) < 3.0 * acc.stderr_mean());
  // The tight band trades every step and costs nothing.
  CHECK(records[0].n_trades > 150);
  CHECK(records[0].total_fixed_cost == 0.0);
}

TEST_CASE("trade frequency tracks the boundary hit rate") {
  // The equilibrium rate needs cycles much shorter than the horizon, so use a
  // small-epsilon band: mixing time gamma^2/a^2 = 0.17y against T = 1y.
  const MertonSolution sol = testsup::reference_merton();
  const double eps = 1e-6;
  const double gamma0 = optimal_band_fixed(eps, sol, 1.0, 0.0);
  const double a0 = sol.noise_coefficient(1.0);
  const double dt = std::pow(gamma0 / (20.0 * a0), 2.0);
  SimConfig cfg(sol, CostParams{eps, 0.0},
                BandSource::fixed_policy(BandPolicy::symmetric(gamma0, 0.0)), dt,
                20000, 4321, 1.0);
  const auto records = simulate_all(cfg);
  MeanVar trades;
  for (const auto& rec : records) trades.add((double)rec.n_trades);
  // Both boundaries: total expected rate is a^2 / gamma^2 per year.
  const double expected = a0 * a0 / (gamma0 * gamma0) * sol.horizon();
  CHECK(std::abs(trades.mean - expected) < 0.15 * expected);
}

TEST_CASE("trade events sit on the boundary, never strictly inside") {
  const MertonSolution sol = testsup::reference_merton();
  const BandPolicy policy = BandPolicy::symmetric(0.04, 0.005);
  SimConfig cfg(sol, CostParams{1e-4, 1e-4}, BandSource::fixed_policy(policy),
                5e-4, 300, 31, 1.0);
  cfg.options.record_trades = true;
  const auto records = simulate_all(cfg);
  long total = 0;
  for (const auto& rec : records) {
    for (const auto& event : rec.trades) {
      total += 1;
      const bool upper = event.side == TradeSide::sell;
      if (upper) {
        CHECK(event.xi_before >= policy.gamma * (1.0 - 1e-12));
        CHECK(std::abs(event.xi_after - policy.eta) <= 1e-12 * 2.0);
      } else {
        CHECK(event.xi_before <= -policy.beta * (1.0 - 1e-12));
        CHECK(std::abs(event.xi_after + policy.theta) <= 1e-12 * 2.0);
      }
    }
  }
  CHECK(total > 100);  // the test exercises real trades
}

TEST_CASE("per-path csv replay reproduces the bookkeeping") {
  const MertonSolution sol = testsup::reference_merton();
  const double m_z = sol.merton_ratio_slope();
  const CostParams costs{2e-3, 1e-3};
  SimConfig cfg(sol, costs, BandSource::fixed_policy(BandPolicy::symmetric(0.05, 0.0)),
                1e-3, 10, 2024, 1.0);
  const double gy = std::exp(sol.market().r * cfg.effective_dt());

  for (long path = 0; path < cfg.n_paths; ++path) {
    std::string csv;
    write_path_csv(csv, cfg, path);
    const auto rows = parse_csv(csv);
    REQUIRE(rows.size() == (size_t)cfg.n_steps() + 1);
    long trades = 0;
    for (size_t k = 1; k < rows.size(); ++k) {
      const CsvRow& prev = rows[k - 1];
      const CsvRow& curr = rows[k];
      CHECK(curr.Z == doctest::Approx(curr.X + curr.Y).epsilon(1e-12));
      CHECK(curr.xi == doctest::Approx(curr.X - m_z * curr.Z).epsilon(1e-9));
      double y_pre = curr.Y;  // cash just after the market step, pre-trade
      if (!curr.event.empty()) {
        ++trades;
        const bool sell = curr.event.rfind("sell:", 0) == 0;
        const bool buy = curr.event.rfind("buy:", 0) == 0;
        REQUIRE((sell || buy));
        const double g = std::stod(curr.event.substr(curr.event.find(':') + 1));
        CHECK(g > 0);
        double x_pre, z_pre;
        if (sell) {
          x_pre = curr.X + g;
          y_pre = curr.Y - ((1.0 - costs.lambda) * g - costs.epsilon);
        } else {
          x_pre = curr.X - ((1.0 - costs.lambda) * g - costs.epsilon);
          y_pre = curr.Y + g;
        }
        z_pre = x_pre + y_pre;
        // The wealth drop across the trade is exactly lambda g + epsilon.
        CHECK(z_pre - curr.Z ==
              doctest::Approx(costs.lambda * g + costs.epsilon).epsilon(1e-9));
      }
      // Cash between trades grows at exactly the risk-free factor.
      CHECK(y_pre == doctest::Approx(prev.Y * gy).epsilon(1e-12));
    }
    // Terminal wealth reconstructs from the log: market growth minus costs.
    const PathRecord rec = simulate_path(cfg, path);
    CHECK(rec.terminal_z == doctest::Approx(rows.back().Z).epsilon(1e-12));
    CHECK(rec.n_trades == trades);
  }
}

TEST_CASE("bankruptcy absorbs and flags") {
  const MertonSolution sol = testsup::reference_merton();
  // Fee far too large for the wealth: a few trades drain Z to infeasibility.
  SimConfig cfg(sol, CostParams{0.3, 0.0},
                BandSource::fixed_policy(BandPolicy::symmetric(0.02, 0.0)),
                1.2e-3, 50, 7, 1.0);
  cfg.options.bankruptcy_floor = 0.5;  // two 0.3 fees cross it from z0 = 1
  const auto records = simulate_all(cfg);
  long bankrupt = 0;
  const double floor_utility = sol.utility()(0.5 * 1.0);
  for (const auto& rec : records) {
    if (rec.bankrupt) {
      ++bankrupt;
      CHECK(rec.utility == floor_utility);
    }
  }
  CHECK(bankrupt > 25);  // flagged, never silently dropped
}

TEST_CASE("config validation") {
  const MertonSolution sol = testsup::reference_merton();

  // Too-coarse monitoring for a costly run is rejected...
  SimConfig coarse(sol, CostParams{1e-4, 0.0}, BandSource::merton_scaled(), 0.1,
                   10, 1, 1.0);
  CHECK_THROWS_AS(coarse.validate(), std::invalid_argument);

  // ...but a frictionless control run may monitor as coarsely as it likes.
  SimConfig control(sol, CostParams{0.0, 0.0},
                    BandSource::wealth_fraction_of(1e-4), 0.1, 10, 1, 1.0);
  CHECK_NOTHROW(control.validate());

  CHECK_THROWS_AS(SimConfig(sol, CostParams{1e-4, 0.0},
                            BandSource::merton_scaled(), -1.0, 10, 1, 1.0),
                  std::invalid_argument);

  SimConfig bad_paths(sol, CostParams{1e-4, 0.0}, BandSource::merton_scaled(),
                      1e-3, 0, 1, 1.0);
  CHECK_THROWS_AS(bad_paths.validate(), std::invalid_argument);

  // merton_scaled bands are undefined without a fixed cost.
  SimConfig no_eps(sol, CostParams{0.0, 1e-3}, BandSource::merton_scaled(), 1e-3,
                   10, 1, 1.0);
  CHECK_THROWS_AS(simulate_all(no_eps), std::domain_error);
}

TEST_CASE("initial displacement outside the band trades immediately") {
  const MertonSolution sol = testsup::reference_merton();
  SimConfig cfg(sol, CostParams{1e-4, 0.0},
                BandSource::fixed_policy(BandPolicy::symmetric(0.03, 0.0)), 1e-3,
                1, 5, 1.0);
  cfg.options.record_trades = true;
  cfg.xi0 = 0.08;
  const PathRecord rec = simulate_path(cfg, 0);
  REQUIRE(rec.n_trades >= 1);
  CHECK(rec.trades.front().time == 0.0);
  CHECK(rec.trades.front().xi_before == doctest::Approx(0.08).epsilon(1e-12));
}

TEST_CASE("occupancy samples converge to the triangular density") {
  const MertonSolution sol = testsup::reference_merton();
  const double eps = 1e-5;
  const double gamma0 = optimal_band_fixed(eps, sol, 1.0, 0.0);
  const double a0 = sol.noise_coefficient(1.0);
  const double dt = std::pow(gamma0 / (20.0 * a0), 2.0);

  const MertonSolution long_sol(sol.market(), sol.utility(), 10.0);
  SimConfig cfg(long_sol, CostParams{eps, 0.0}, BandSource::merton_scaled(), dt,
                50, 99, 1.0);
  cfg.options.record_occupancy = true;
  cfg.options.occupancy_burnin = 2.0;
  const OccupancyReport report = occupancy_study(cfg, 0.0);
  CHECK(report.n_samples > 100000);
  CHECK(report.ks < 0.08);
}
