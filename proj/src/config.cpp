#include "bandlab/config.hpp"

#include <cmath>
#include <map>
#include <set>
#include <string>

namespace bandlab {

using nlohmann::json;

const std::vector<OptionSpec>& config_schema() {
  using Type = OptionSpec::Type;
  static const std::vector<OptionSpec> schema = {
      {"--mu", "/market/mu", Type::real, "stock drift mu (1/year)"},
      {"--r", "/market/r", Type::real, "risk-free rate r (1/year)"},
      {"--sigma", "/market/sigma", Type::real, "volatility; sigma > 0"},
      {"--p", "/utility/p", Type::real, "CRRA exponent; p < 1 and p != 0"},
      {"--horizon", "/horizon", Type::real, "horizon T in years; T > 0"},
      {"--epsilon", "/costs/epsilon", Type::real,
       "fixed cost per trade (dollars); epsilon >= 0"},
      {"--lambda", "/costs/lambda", Type::real,
       "proportional cost fraction; 0 <= lambda < 1"},
      {"--C", "/coeffs/C", Type::real,
       "direct opportunity coefficient for `bands` (C < 0); 0 derives it"},
      {"--R", "/coeffs/R", Type::real,
       "direct trading coefficient for `bands` (R < 0); 0 derives it"},
      {"--B", "/quartic/B", Type::real,
       "curvature constant for `freeboundary` (B < 0); 0 derives it"},
      {"--a2", "/quartic/a2", Type::real,
       "squared noise coefficient for `freeboundary` (a2 > 0); 0 derives it"},
      {"--fz", "/quartic/fz", Type::real,
       "marginal value f0_z for `freeboundary` (fz > 0); 0 derives it"},
      {"--mode", "/policy/mode", Type::text,
       "policy mode: asymptotic | numeric | fixed | search"},
      {"--gamma", "/policy/gamma", Type::real, "fixed policy: upper half-width"},
      {"--beta", "/policy/beta", Type::real, "fixed policy: lower half-width"},
      {"--eta", "/policy/eta", Type::real,
       "fixed policy: upper destination offset; 0 <= eta < gamma"},
      {"--theta", "/policy/theta", Type::real,
       "fixed policy: lower destination offset; 0 <= theta < beta"},
      {"--z0", "/sim/z0", Type::real, "initial wealth; z0 > 0"},
      {"--xi0", "/sim/xi0", Type::real, "initial displacement"},
      {"--dt", "/sim/dt", Type::real, "time step (years); 0 = auto"},
      {"--paths", "/sim/paths", Type::integer, "simulated paths; >= 1"},
      {"--seed", "/sim/seed", Type::integer, "64-bit master seed"},
      {"--burnin", "/sim/burnin", Type::real,
       "occupancy burn-in (years); negative = auto"},
      {"--stride", "/sim/stride", Type::integer, "occupancy sample stride; >= 1"},
      {"--dump-path", "/sim/dump_path", Type::integer,
       "path index written by --dump"},
      {"--epsilons", "/sweep/epsilons", Type::real_list,
       "sweep grid, strictly decreasing, >= 4 points"},
      {"--q", "/sweep/q", Type::real, "coupling exponent, lambda = c eps^q; in [0,2]"},
      {"--coupling-c", "/sweep/coupling_c", Type::real,
       "coupling constant c; 0 disables the proportional leg"},
      {"--sweep-paths", "/sweep/paths", Type::integer, "paths per sweep point"},
      {"--search-paths", "/sweep/search_paths", Type::integer,
       "paths per band-search evaluation"},
      {"--full-2d", "/sweep/full_2d", Type::boolean,
       "search destination offset too (band-exponent arbitration)"},
      {"--csv", "/output/csv", Type::text, "CSV artifact path"},
      {"--json", "/output/json", Type::text, "JSON artifact path"},
      {"--dump", "/output/dump", Type::text, "per-path CSV dump path (simulate)"},
  };
  return schema;
}

namespace {

std::string strip_slash(const std::string& pointer) {
  std::string out = pointer.substr(1);
  for (auto& c : out)
    if (c == '/') c = '.';
  return out;
}

// Allowed-keys tree derived from the schema pointers.
void check_unknown_keys(const json& doc) {
  std::map<std::string, std::set<std::string>> children;
  for (const auto& opt : config_schema()) {
    const std::string ptr = opt.pointer;
    std::string parent = "";
    size_t pos = 1;
    for (;;) {
      const size_t next = ptr.find('/', pos);
      const std::string key =
          ptr.substr(pos, next == std::string::npos ? next : next - pos);
      children[parent].insert(key);
      if (next == std::string::npos) break;
      parent += "/" + key;
      pos = next + 1;
    }
  }
  std::function<void(const json&, const std::string&)> walk =
      [&](const json& node, const std::string& path) {
        if (!node.is_object()) return;
        const auto it = children.find(path);
        for (const auto& [key, value] : node.items()) {
          if (it == children.end() || !it->second.count(key)) {
            const std::string where =
                path.empty() ? key : strip_slash(path) + "." + key;
            throw ConfigError(where + ": unknown configuration key");
          }
          walk(value, path + "/" + key);
        }
      };
  walk(doc, "");
}

double read_real(const json& doc, const char* pointer, double fallback) {
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) return fallback;
  const json& node = doc.at(ptr);
  if (!node.is_number())
    throw ConfigError(strip_slash(pointer) + ": expected a number");
  return node.get<double>();
}

long long read_integer(const json& doc, const char* pointer, long long fallback) {
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) return fallback;
  const json& node = doc.at(ptr);
  if (!node.is_number_integer() && !node.is_number_unsigned())
    throw ConfigError(strip_slash(pointer) + ": expected an integer");
  return node.get<long long>();
}

std::uint64_t read_u64(const json& doc, const char* pointer,
                       std::uint64_t fallback) {
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) return fallback;
  const json& node = doc.at(ptr);
  if (!node.is_number_integer() && !node.is_number_unsigned())
    throw ConfigError(strip_slash(pointer) + ": expected an integer");
  return node.get<std::uint64_t>();
}

std::string read_text(const json& doc, const char* pointer,
                      const std::string& fallback) {
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) return fallback;
  const json& node = doc.at(ptr);
  if (!node.is_string())
    throw ConfigError(strip_slash(pointer) + ": expected a string");
  return node.get<std::string>();
}

bool read_bool(const json& doc, const char* pointer, bool fallback) {
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) return fallback;
  const json& node = doc.at(ptr);
  if (!node.is_boolean())
    throw ConfigError(strip_slash(pointer) + ": expected a boolean");
  return node.get<bool>();
}

std::vector<double> read_reals(const json& doc, const char* pointer,
                               std::vector<double> fallback) {
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) return fallback;
  const json& node = doc.at(ptr);
  if (!node.is_array())
    throw ConfigError(strip_slash(pointer) + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& item : node) {
    if (!item.is_number())
      throw ConfigError(strip_slash(pointer) + ": expected an array of numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

}  // namespace

RunConfig parse_config_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  check_unknown_keys(doc);

  RunConfig cfg;
  cfg.spec.market.mu = read_real(doc, "/market/mu", cfg.spec.market.mu);
  cfg.spec.market.r = read_real(doc, "/market/r", cfg.spec.market.r);
  cfg.spec.market.sigma = read_real(doc, "/market/sigma", cfg.spec.market.sigma);
  cfg.spec.p = read_real(doc, "/utility/p", cfg.spec.p);
  cfg.spec.horizon = read_real(doc, "/horizon", cfg.spec.horizon);
  cfg.costs.epsilon = read_real(doc, "/costs/epsilon", cfg.costs.epsilon);
  cfg.costs.lambda = read_real(doc, "/costs/lambda", cfg.costs.lambda);
  cfg.coeffs.C = read_real(doc, "/coeffs/C", cfg.coeffs.C);
  cfg.coeffs.R = read_real(doc, "/coeffs/R", cfg.coeffs.R);
  cfg.quartic.B = read_real(doc, "/quartic/B", cfg.quartic.B);
  cfg.quartic.a2 = read_real(doc, "/quartic/a2", cfg.quartic.a2);
  cfg.quartic.fz = read_real(doc, "/quartic/fz", cfg.quartic.fz);
  cfg.policy.mode = read_text(doc, "/policy/mode", cfg.policy.mode);
  cfg.policy.gamma = read_real(doc, "/policy/gamma", cfg.policy.gamma);
  cfg.policy.beta = read_real(doc, "/policy/beta", cfg.policy.beta);
  cfg.policy.eta = read_real(doc, "/policy/eta", cfg.policy.eta);
  cfg.policy.theta = read_real(doc, "/policy/theta", cfg.policy.theta);
  cfg.spec.z0 = read_real(doc, "/sim/z0", cfg.spec.z0);
  cfg.sim.xi0 = read_real(doc, "/sim/xi0", cfg.sim.xi0);
  cfg.sim.dt = read_real(doc, "/sim/dt", cfg.sim.dt);
  cfg.sim.paths = read_integer(doc, "/sim/paths", cfg.sim.paths);
  cfg.sim.seed = read_u64(doc, "/sim/seed", cfg.sim.seed);
  cfg.sim.burnin = read_real(doc, "/sim/burnin", cfg.sim.burnin);
  cfg.sim.stride = read_integer(doc, "/sim/stride", cfg.sim.stride);
  cfg.sim.dump_path = read_integer(doc, "/sim/dump_path", cfg.sim.dump_path);
  cfg.sweep.epsilons = read_reals(doc, "/sweep/epsilons", cfg.sweep.epsilons);
  cfg.sweep.q = read_real(doc, "/sweep/q", cfg.sweep.q);
  cfg.sweep.coupling_c = read_real(doc, "/sweep/coupling_c", cfg.sweep.coupling_c);
  cfg.sweep.paths = read_integer(doc, "/sweep/paths", cfg.sweep.paths);
  cfg.sweep.search_paths =
      read_integer(doc, "/sweep/search_paths", cfg.sweep.search_paths);
  cfg.sweep.full_2d = read_bool(doc, "/sweep/full_2d", cfg.sweep.full_2d);
  cfg.output.csv = read_text(doc, "/output/csv", cfg.output.csv);
  cfg.output.json = read_text(doc, "/output/json", cfg.output.json);
  cfg.output.dump = read_text(doc, "/output/dump", cfg.output.dump);

  // Re-check every module invariant the config touches.
  try {
    (void)MertonSolution(cfg.spec.market, CrraUtility{cfg.spec.p},
                         cfg.spec.horizon);
    cfg.costs.validate();
    if (cfg.coeffs.C != 0.0 && !(cfg.coeffs.C < 0))
      throw std::invalid_argument("coeffs.C: requires C < 0 when provided");
    if (cfg.coeffs.R != 0.0 && !(cfg.coeffs.R < 0))
      throw std::invalid_argument("coeffs.R: requires R < 0 when provided");
    if (cfg.quartic.a2 != 0.0) {
      if (!(cfg.quartic.a2 > 0))
        throw std::invalid_argument("quartic.a2: requires a2 > 0");
      if (!(cfg.quartic.B < 0))
        throw std::invalid_argument("quartic.B: requires B < 0");
      if (!(cfg.quartic.fz > 0))
        throw std::invalid_argument("quartic.fz: requires fz > 0");
    }
    if (cfg.policy.mode != "asymptotic" && cfg.policy.mode != "numeric" &&
        cfg.policy.mode != "fixed" && cfg.policy.mode != "search")
      throw std::invalid_argument(
          "policy.mode: must be asymptotic | numeric | fixed | search");
    if (cfg.policy.mode == "fixed")
      BandPolicy{cfg.policy.gamma, cfg.policy.beta, cfg.policy.eta,
                 cfg.policy.theta}
          .validate();
    if (!(cfg.spec.z0 > 0))
      throw std::invalid_argument("sim.z0: requires z0 > 0");
    if (!std::isfinite(cfg.sim.xi0))
      throw std::invalid_argument("sim.xi0: must be finite");
    if (cfg.sim.dt < 0) throw std::invalid_argument("sim.dt: requires dt >= 0");
    if (cfg.sim.paths < 1)
      throw std::invalid_argument("sim.paths: requires paths >= 1");
    if (cfg.sim.stride < 1)
      throw std::invalid_argument("sim.stride: requires stride >= 1");
    if (cfg.sim.dump_path < 0)
      throw std::invalid_argument("sim.dump_path: requires index >= 0");
    SweepSpec structural;
    structural.epsilons = cfg.sweep.epsilons;
    structural.q = cfg.sweep.q;
    structural.coupling_c = cfg.sweep.coupling_c;
    structural.paths = cfg.sweep.paths;
    structural.search_paths = cfg.sweep.search_paths;
    structural.mode = PolicyMode::numeric_optimal;  // coupling rule checked at run
    structural.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config_json(doc);
}

json to_json(const RunConfig& cfg) {
  json doc;
  doc["market"] = {{"mu", cfg.spec.market.mu},
                   {"r", cfg.spec.market.r},
                   {"sigma", cfg.spec.market.sigma}};
  doc["utility"] = {{"p", cfg.spec.p}};
  doc["horizon"] = cfg.spec.horizon;
  doc["costs"] = {{"epsilon", cfg.costs.epsilon}, {"lambda", cfg.costs.lambda}};
  doc["coeffs"] = {{"C", cfg.coeffs.C}, {"R", cfg.coeffs.R}};
  doc["quartic"] = {{"B", cfg.quartic.B},
                    {"a2", cfg.quartic.a2},
                    {"fz", cfg.quartic.fz}};
  doc["policy"] = {{"mode", cfg.policy.mode},
                   {"gamma", cfg.policy.gamma},
                   {"beta", cfg.policy.beta},
                   {"eta", cfg.policy.eta},
                   {"theta", cfg.policy.theta}};
  doc["sim"] = {{"z0", cfg.spec.z0},       {"xi0", cfg.sim.xi0},
                {"dt", cfg.sim.dt},        {"paths", cfg.sim.paths},
                {"seed", cfg.sim.seed},    {"burnin", cfg.sim.burnin},
                {"stride", cfg.sim.stride}, {"dump_path", cfg.sim.dump_path}};
  doc["sweep"] = {{"epsilons", cfg.sweep.epsilons},
                  {"q", cfg.sweep.q},
                  {"coupling_c", cfg.sweep.coupling_c},
                  {"paths", cfg.sweep.paths},
                  {"search_paths", cfg.sweep.search_paths},
                  {"full_2d", cfg.sweep.full_2d}};
  doc["output"] = {{"csv", cfg.output.csv},
                   {"json", cfg.output.json},
                   {"dump", cfg.output.dump}};
  return doc;
}

}  // namespace bandlab
