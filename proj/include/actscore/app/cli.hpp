#pragma once

// Argument handling for the command-line tool. Needs CLI11 on the include path.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "actscore/app/commands.hpp"
#include "actscore/app/config.hpp"
#include "actscore/binary_io.hpp"

namespace actscore::app {

inline std::string usage() {
  std::string s = "usage: actscore <command> [--config <path>] [--seed <u64>] [--out <dir>]\ncommands:";
  for (const auto& c : command_names()) s += " " + c;
  return s + "\n";
}

/// Parses flags, loads the config and runs `command`. Returns the exit
/// status; failures print one line to `err`.
inline int dispatch(const std::string& command, const std::vector<std::string>& args, std::ostream& err = std::cerr) {
  if (std::find(command_names().begin(), command_names().end(), command) == command_names().end()) {
    err << "actscore: unknown command '" << command << "'\n" << usage();
    return 2;
  }
  CLI::App app{"actscore " + command};
  std::string config_path, out;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seed, "overrides the configured seeds with this one");
  app.add_option("--out", out, "output directory");
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    err << "actscore " << command << ": " << e.what() << "\n";
    return 2;
  }
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config(io::read_text(config_path));
    if (seed) cfg.seeds = {*seed};
    if (!out.empty()) cfg.out_dir = out;
    return run_command(command, cfg);
  } catch (const std::exception& e) {
    err << "actscore " << command << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace actscore::app
