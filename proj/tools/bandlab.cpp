#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "bandlab/cli_app.hpp"
#include "bandlab/config.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{
      "bandlab - portfolio rebalancing bands under small fixed and "
      "proportional transaction costs"};
  json overrides = json::object();
  std::string config_path;
  bandlab::build_cli(app, overrides, config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  std::string command;
  for (const char* name : bandlab::kSubcommands)
    if (app.got_subcommand(name)) command = name;

  json doc = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cout << json{{"error", "cannot read config file: " + config_path}}.dump(2)
                << "\n";
      return 1;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
      doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
      std::cout << json{{"error", std::string("config: malformed JSON: ") + e.what()}}
                       .dump(2)
                << "\n";
      return 1;
    }
  }
  doc.merge_patch(overrides);  // flags override config-file values

  bandlab::RunConfig config;
  try {
    config = bandlab::parse_config_json(doc);
  } catch (const bandlab::ConfigError& e) {
    std::cout << json{{"error", e.what()}}.dump(2) << "\n";
    return 1;
  }

  const bandlab::DispatchResult result = bandlab::dispatch(command, config);
  std::cout << result.output;
  return result.exit_code;
}
