#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "bandlab/cli_app.hpp"
#include "bandlab/config.hpp"

using namespace bandlab;
using nlohmann::json;

TEST_CASE("minimal config is accepted with defaults filled in") {
  const std::string text = R"({
    "market": {"mu": 0.1, "r": 0.02, "sigma": 0.2},
    "utility": {"p": -3},
    "horizon": 1.0,
    "costs": {"epsilon": 1e-4},
    "sweep": {"q": 0.75}
  })";
  const RunConfig cfg = parse_config(text);
  CHECK(cfg.spec.market.mu == 0.1);
  CHECK(cfg.spec.p == -3.0);
  CHECK(cfg.costs.epsilon == 1e-4);
  CHECK(cfg.costs.lambda == 0.0);
  CHECK(cfg.sweep.q == 0.75);
  CHECK(cfg.policy.mode == "asymptotic");  // default
  CHECK(cfg.spec.z0 == 1.0);
}

TEST_CASE("constraint violations name the key") {
  const std::string bad_p = R"({"utility": {"p": 1.0}})";
  try {
    parse_config(bad_p);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("utility.p") != std::string::npos);
    CHECK(msg.find("p < 1") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_config(R"({"costs": {"lambda": 1.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"market": {"sigma": -0.2}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"sim": {"dt": -0.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"sweep": {"q": 3.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("not json at all"), ConfigError);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    parse_config(R"({"market": {"mu": 0.1, "drift": 0.2}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("market.drift") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"markets": {}})"), ConfigError);
}

TEST_CASE("config round trip is the identity") {
  RunConfig cfg;
  cfg.spec.market.mu = 0.07;
  cfg.costs = CostParams{2e-4, 1e-3};
  cfg.sweep.epsilons = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  cfg.policy.mode = "numeric";
  cfg.output.csv = "table.csv";
  const json doc = to_json(cfg);
  const RunConfig parsed = parse_config(doc.dump());
  CHECK(to_json(parsed) == doc);
}

TEST_CASE("flags override config-file values") {
  json file_doc = json::parse(R"({"costs": {"epsilon": 1.0e-2, "lambda": 0.001}})");
  json overrides = json::object();
  overrides[json::json_pointer("/costs/epsilon")] = 5e-4;
  file_doc.merge_patch(overrides);
  const RunConfig cfg = parse_config_json(file_doc);
  CHECK(cfg.costs.epsilon == 5e-4);   // flag wins
  CHECK(cfg.costs.lambda == 0.001);   // file value survives
}

TEST_CASE("help text lists every schema flag for every subcommand") {
  for (const char* sub : kSubcommands) {
    const std::string help = cli_help(sub);
    for (const auto& opt : config_schema())
      CHECK_MESSAGE(help.find(opt.flag) != std::string::npos,
                    "missing " << opt.flag << " in help of " << sub);
    CHECK(help.find("--config") != std::string::npos);
  }
}

TEST_CASE("bands subcommand reproduces the closed form") {
  RunConfig cfg;
  cfg.coeffs.C = -1.0;
  cfg.coeffs.R = -1.0;
  cfg.costs = CostParams{1e-4, 0.0};
  const DispatchResult result = dispatch("bands", cfg);
  REQUIRE(result.exit_code == 0);
  const json doc = json::parse(result.output);
  CHECK(doc["gamma"].get<double>() == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(doc["eta"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(doc["numeric"]["foc_m"].get<double>()) < 1e-10);
  CHECK(doc["asymptotic"].contains("omega"));
}

TEST_CASE("freeboundary subcommand solves the constructed instance") {
  RunConfig cfg;
  cfg.quartic.B = -1.0;
  cfg.quartic.a2 = 1.0;
  cfg.quartic.fz = 1.0 / 6.0;
  const DispatchResult result = dispatch("freeboundary", cfg);
  REQUIRE(result.exit_code == 0);
  const json doc = json::parse(result.output);
  CHECK(doc["gamma"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(doc["eta"].get<double>() == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(doc["K"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("merton subcommand prints the closed form") {
  RunConfig cfg;
  const DispatchResult result = dispatch("merton", cfg);
  REQUIRE(result.exit_code == 0);
  const json doc = json::parse(result.output);
  CHECK(doc["rho"].get<double>() == doctest::Approx(-0.12).epsilon(1e-12));
  CHECK(doc["m"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(doc["a"].get<double>() == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("dispatch error paths") {
  RunConfig cfg;

  const DispatchResult unknown = dispatch("frobnicate", cfg);
  CHECK(unknown.exit_code == 1);
  CHECK(json::parse(unknown.output).contains("error"));

  // Both costs zero: the band optimizer has nothing to optimize.
  cfg.costs = CostParams{0.0, 0.0};
  const DispatchResult bad = dispatch("bands", cfg);
  CHECK(bad.exit_code == 1);
  CHECK(json::parse(bad.output).contains("error"));
}

TEST_CASE("dispatch output is deterministic") {
  RunConfig cfg;
  cfg.sim.paths = 200;
  cfg.sim.dt = 2e-3;
  const DispatchResult a = dispatch("simulate", cfg);
  const DispatchResult b = dispatch("simulate", cfg);
  REQUIRE(a.exit_code == 0);
  CHECK(a.output == b.output);
  const json doc = json::parse(a.output);
  CHECK(doc["paths"].get<long>() == 200);
  CHECK(doc["mean_utility"].get<double>() < 0);
}

TEST_CASE("simulate rejects the search mode") {
  RunConfig cfg;
  cfg.policy.mode = "search";
  const DispatchResult result = dispatch("simulate", cfg);
  CHECK(result.exit_code == 1);
}
