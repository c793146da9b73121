#pragma once

#include <string>

#include <CLI11.hpp>
#include <json.hpp>

namespace bandlab {

/// Registers all seven subcommands. Every schema flag is available on every
/// subcommand (they share one configuration) plus --config for a JSON file.
/// Parsed flag values land in `overrides` at their schema JSON pointer;
/// flags take precedence over config-file values via a JSON merge.
void build_cli(CLI::App& app, nlohmann::json& overrides,
               std::string& config_path);

const char* const kSubcommands[7] = {"merton",   "bands", "freeboundary",
                                     "simulate", "sweep", "density",
                                     "check"};

}  // namespace bandlab
