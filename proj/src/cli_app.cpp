#include "bandlab/cli_app.hpp"

#include "bandlab/config.hpp"

namespace bandlab {

using nlohmann::json;

namespace {

void register_schema_flags(CLI::App* sub, json& overrides) {
  for (const auto& opt : config_schema()) {
    const std::string pointer = opt.pointer;
    switch (opt.type) {
      case OptionSpec::Type::real:
        sub->add_option_function<double>(
            opt.flag,
            [&overrides, pointer](const double& v) {
              overrides[json::json_pointer(pointer)] = v;
            },
            opt.help);
        break;
      case OptionSpec::Type::integer:
        sub->add_option_function<long long>(
            opt.flag,
            [&overrides, pointer](const long long& v) {
              overrides[json::json_pointer(pointer)] = v;
            },
            opt.help);
        break;
      case OptionSpec::Type::text:
        sub->add_option_function<std::string>(
            opt.flag,
            [&overrides, pointer](const std::string& v) {
              overrides[json::json_pointer(pointer)] = v;
            },
            opt.help);
        break;
      case OptionSpec::Type::boolean:
        sub->add_flag_function(
            opt.flag,
            [&overrides, pointer](int count) {
              overrides[json::json_pointer(pointer)] = count > 0;
            },
            opt.help);
        break;
      case OptionSpec::Type::real_list:
        sub->add_option_function<std::vector<double>>(
            opt.flag,
            [&overrides, pointer](const std::vector<double>& v) {
              overrides[json::json_pointer(pointer)] = v;
            },
            opt.help);
        break;
    }
  }
}

const char* subcommand_help(const std::string& name) {
  if (name == "merton") return "print f0, derivatives, Merton ratio and a at (z0, 0)";
  if (name == "bands") return "asymptotic and numeric optimal bands plus FOC residuals";
  if (name == "freeboundary") return "solve the rescaled free-boundary system";
  if (name == "simulate") return "simulate band-policy paths; JSON summary, optional CSV dump";
  if (name == "sweep") return "epsilon sweep: value-gap or band-search scaling study (CSV + JSON)";
  if (name == "density") return "occupancy histogram vs the equilibrium density (CSV + JSON)";
  return "run the fast invariant suite; exit 3 on failure";
}

}  // namespace

void build_cli(CLI::App& app, json& overrides, std::string& config_path) {
  app.require_subcommand(1);
  for (const char* name : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name, subcommand_help(name));
    sub->add_option("--config", config_path, "JSON configuration file");
    register_schema_flags(sub, overrides);
  }
}

std::string cli_help(const std::string& subcommand) {
  CLI::App app{"bandlab"};
  json overrides = json::object();
  std::string config_path;
  build_cli(app, overrides, config_path);
  const CLI::App* sub = app.get_subcommand(subcommand);
  return sub->help();
}

}  // namespace bandlab
