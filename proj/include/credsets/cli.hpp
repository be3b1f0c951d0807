#pragma once

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "credsets/experiments/config.hpp"
#include "credsets/experiments/output.hpp"
#include "credsets/serialization.hpp"

namespace credsets {

/// Exit codes of cli_main.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2 };

namespace cli_detail {

inline Json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + what + " '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(what + " '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace cli_detail

/// credsets <coverage|freedman|scaling|bvm|figure1> --config <path> [--out <dir>] [--seed <u64>] [--threads <k>]
/// credsets check-class --signal <csv> --params <json> [--out <dir>]
///
/// Returns 0 on success, 1 on usage or config errors, 2 on runtime errors.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Credible-set coverage experiments in the Gaussian sequence model", "credsets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(CREDSETS_VERSION));

  std::string config_path, out_dir, signal_path, params_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  std::vector<std::pair<experiments::Kind, CLI::App*>> runs;
  for (auto kind : {experiments::Kind::Coverage, experiments::Kind::Freedman, experiments::Kind::Scaling,
                    experiments::Kind::Bvm, experiments::Kind::Figure1}) {
    auto* sub = app.add_subcommand(experiments::to_string(kind), "Run the " + experiments::to_string(kind) + " experiment");
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides config \"output\")");
    sub->add_option("--seed", seed, "Master seed (overrides config \"seed\")");
    sub->add_option("--threads", threads, "Worker threads; outputs do not depend on it");
    runs.emplace_back(kind, sub);
  }
  auto* check = app.add_subcommand("check-class", "Check a signal against a signal-strength class");
  check->add_option("--signal", signal_path, "Signal CSV (index,level,position,value)")->required();
  check->add_option("--params", params_path, "Params JSON with a \"condition\" field")->required();
  check->add_option("--out", out_dir, "Also write verdict.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << CREDSETS_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "credsets: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (check->parsed()) {
      SignalVector theta;
      try {
        theta = read_signal_csv(signal_path);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("signal: ") + e.what());
      }
      const auto verdict = check_class_verdict(theta, cli_detail::read_json_file(params_path, "params"));
      out << verdict.dump(2) << '\n';
      if (!out_dir.empty()) {
        experiments::prepare_directory(out_dir);
        experiments::write_json(experiments::fs::path(out_dir) / "verdict.json", verdict);
      }
      return kExitOk;
    }

    for (const auto& [kind, sub] : runs) {
      if (!sub->parsed()) continue;
      auto config = experiments::load_config(config_path, kind);
      if (seed) {
        config.master_seed = *seed;
      }
      if (threads) config.threads = *threads == 0 ? 1 : *threads;
      if (!out_dir.empty()) config.output = out_dir;
      if (config.output.empty()) throw ConfigError("no output directory: pass --out or set \"output\"");
      const auto summary = experiments::run_experiment(config, config.output);
      out << summary.dump(2) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "credsets: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "credsets: error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace credsets
