#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "credsets/serialization.hpp"

namespace credsets::experiments {

enum class Kind { Coverage, Freedman, Scaling, Bvm, Figure1 };

inline std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::Coverage: return "coverage";
    case Kind::Freedman: return "freedman";
    case Kind::Scaling: return "scaling";
    case Kind::Bvm: return "bvm";
    case Kind::Figure1: return "figure1";
  }
  return "?";
}

inline std::optional<Kind> parse_kind(const std::string& name) {
  for (Kind k : {Kind::Coverage, Kind::Freedman, Kind::Scaling, Kind::Bvm, Kind::Figure1})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

/// Where theta0 comes from.
struct TruthSpec {
  enum class Generator { Polynomial, Lacunary, Zero, Csv };
  Generator generator = Generator::Polynomial;
  double beta = 1.0;
  double amplitude = 1.0;
  std::size_t q = 2;
  std::string csv_path;
};

struct PriorSpec {
  /// Fixed regularity; ignored when gamma_grid is non-empty.
  double gamma = 1.0;
  /// Empirical-Bayes grid; empty means fixed gamma.
  std::vector<double> gamma_grid;
  double tau = 1.0;

  bool empirical_bayes() const { return !gamma_grid.empty(); }
};

/// Everything a run needs. Built from JSON by parse_config.
struct ExperimentConfig {
  Kind kind = Kind::Coverage;
  TruthSpec truth;
  PriorSpec prior;
  /// Single n, or the sweep for freedman/scaling/bvm.
  std::vector<double> n_grid;
  std::optional<std::size_t> K;
  double alpha = 0.05;
  double blowup = 1.0;
  Json norm = Json{{"name", "l2"}};
  std::size_t draws = 1000;
  std::size_t replications = 1;
  std::uint64_t master_seed = 1;
  bool zero_noise = false;
  unsigned threads = 1;
  std::string output;
  // figure1
  std::size_t subsample = 100;
  // bvm
  std::size_t grid_points = 200;
  double reference_variance = 1.0;

  /// The JSON this config was parsed from, echoed into manifests.
  Json source;

  double n() const { return n_grid.front(); }
};

namespace config_detail {

inline TruthSpec parse_truth(const Json& j) {
  using namespace json_detail;
  const std::string where = "truth";
  TruthSpec t;
  if (j.contains("csv")) {
    reject_unknown(j, {"csv"}, where);
    if (!j.at("csv").is_string()) throw ConfigError("truth: \"csv\" must be a path string");
    t.generator = TruthSpec::Generator::Csv;
    t.csv_path = j.at("csv").get<std::string>();
    return t;
  }
  const auto& gen = require(j, "generator", where);
  if (!gen.is_string()) throw ConfigError("truth: \"generator\" must be a string");
  const auto name = gen.get<std::string>();
  if (name == "polynomial") {
    reject_unknown(j, {"generator", "beta", "amplitude"}, where);
    t.generator = TruthSpec::Generator::Polynomial;
    t.beta = number(j, "beta", where);
    t.amplitude = number_or(j, "amplitude", 1.0, where);
    if (!(t.beta > 0.0)) throw ConfigError("truth: beta must be positive");
  } else if (name == "lacunary") {
    reject_unknown(j, {"generator", "q"}, where);
    t.generator = TruthSpec::Generator::Lacunary;
    t.q = count_or(j, "q", 2, where);
    if (t.q < 2) throw ConfigError("truth: q must be >= 2");
  } else if (name == "zero") {
    reject_unknown(j, {"generator"}, where);
    t.generator = TruthSpec::Generator::Zero;
  } else {
    throw ConfigError("truth: unknown generator \"" + name + "\"");
  }
  return t;
}

inline PriorSpec parse_prior(const Json& j) {
  using namespace json_detail;
  const std::string where = "prior";
  reject_unknown(j, {"gamma", "gamma_grid", "tau"}, where);
  PriorSpec p;
  if (j.contains("gamma") == j.contains("gamma_grid"))
    throw ConfigError("prior: give exactly one of \"gamma\" or \"gamma_grid\"");
  if (j.contains("gamma")) {
    p.gamma = number(j, "gamma", where);
    if (!(p.gamma > 0.0)) throw ConfigError("prior: gamma must be positive");
  } else {
    p.gamma_grid = numbers(j, "gamma_grid", where);
    if (p.gamma_grid.empty()) throw ConfigError("prior: gamma_grid is empty");
    for (std::size_t i = 0; i < p.gamma_grid.size(); ++i)
      if (!(p.gamma_grid[i] > 0.0) || (i > 0 && !(p.gamma_grid[i] > p.gamma_grid[i - 1])))
        throw ConfigError("prior: gamma_grid must be positive and strictly increasing");
  }
  p.tau = number_or(j, "tau", 1.0, where);
  if (!(p.tau > 0.0)) throw ConfigError("prior: tau must be positive");
  return p;
}

}  // namespace config_detail

/// Validates `j` as a config for `kind`. Unknown fields are rejected and
/// missing required fields are named in the error.
inline ExperimentConfig parse_config(const Json& j, Kind kind) {
  using namespace json_detail;
  const std::string where = "config";
  reject_unknown(j,
                 {"kind", "truth", "prior", "n", "n_grid", "K", "alpha", "blowup", "norm", "draws", "replications",
                  "seed", "noise", "threads", "output", "subsample", "grid_points", "reference_variance"},
                 where);
  ExperimentConfig c;
  c.kind = kind;
  c.source = j;
  if (j.contains("kind")) {
    if (!j.at("kind").is_string() || j.at("kind").get<std::string>() != to_string(kind))
      throw ConfigError("config: \"kind\" does not match subcommand " + to_string(kind));
  }

  c.truth = config_detail::parse_truth(require(j, "truth", where));
  c.prior = config_detail::parse_prior(require(j, "prior", where));

  const bool sweep = kind == Kind::Freedman || kind == Kind::Scaling || kind == Kind::Bvm;
  if (sweep) {
    c.n_grid = numbers(j, "n_grid", where);
    const std::size_t min_points = kind == Kind::Scaling ? 3 : 2;
    if (c.n_grid.size() < min_points)
      throw ConfigError("config: \"n_grid\" needs at least " + std::to_string(min_points) + " points");
    // bvm accepts repeated values, which rerun the same seeds.
    for (std::size_t i = 1; i < c.n_grid.size(); ++i)
      if (kind == Kind::Bvm ? c.n_grid[i] < c.n_grid[i - 1] : !(c.n_grid[i] > c.n_grid[i - 1]))
        throw ConfigError("config: \"n_grid\" must be increasing");
    if (j.contains("n")) throw ConfigError("config: use \"n_grid\", not \"n\", for " + to_string(kind));
  } else {
    if (j.contains("n_grid")) throw ConfigError("config: use \"n\", not \"n_grid\", for " + to_string(kind));
    c.n_grid = {kind == Kind::Figure1 ? number_or(j, "n", 1000.0, where) : number(j, "n", where)};
  }
  for (double n : c.n_grid)
    if (!(n > 0.0)) throw ConfigError("config: n must be positive");

  if (j.contains("K")) {
    c.K = count(j, "K", where);
    if (*c.K == 0) throw ConfigError("config: K must be positive");
  }

  if (kind == Kind::Coverage || kind == Kind::Scaling || kind == Kind::Figure1) {
    c.alpha = number(j, "alpha", where);
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("config: alpha must lie in (0, 1)");
  } else if (j.contains("alpha")) {
    throw ConfigError("config: \"alpha\" is not used by " + to_string(kind));
  }

  c.blowup = number_or(j, "blowup", 1.0, where);
  if (!(c.blowup >= 1.0)) throw ConfigError("config: blowup must be >= 1");

  if (j.contains("norm")) c.norm = j.at("norm");
  const std::string norm_name =
      c.norm.is_object() && c.norm.contains("name") && c.norm.at("name").is_string() ? c.norm.at("name").get<std::string>() : "";
  const bool h_norm = norm_name.find("ellipsoid") != std::string::npos || norm_name.find("multiscale") != std::string::npos;
  if (kind == Kind::Freedman && norm_name != "l2") throw ConfigError("config: freedman uses the l2 norm");
  if ((kind == Kind::Scaling || kind == Kind::Bvm) && !h_norm)
    throw ConfigError("config: " + to_string(kind) + " needs an ellipsoid or multiscale norm");
  if (kind == Kind::Figure1) {
    if (!j.contains("norm")) c.norm = Json{{"name", "default-ellipsoid"}};
    else if (norm_name.find("ellipsoid") == std::string::npos)
      throw ConfigError("config: figure1 compares l2 with an ellipsoid norm; \"norm\" must be an ellipsoid");
  } else if (kind != Kind::Freedman && !j.contains("norm")) {
    require(j, "norm", where);
  }

  c.draws = kind == Kind::Figure1 ? count_or(j, "draws", 100000, where) : count(j, "draws", where);
  if (c.draws == 0) throw ConfigError("config: draws must be positive");
  if (kind == Kind::Freedman && c.draws < 2) throw ConfigError("config: freedman needs draws >= 2");
  c.replications = kind == Kind::Figure1 ? count_or(j, "replications", 1, where) : count(j, "replications", where);
  if (c.replications == 0) throw ConfigError("config: replications must be positive");
  if (kind == Kind::Figure1 && c.replications != 1) throw ConfigError("config: figure1 runs one replication");

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0))
      throw ConfigError("config: seed must be a nonnegative integer");
    c.master_seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("noise")) {
    const auto& v = j.at("noise");
    if (!v.is_string() || (v.get<std::string>() != "gaussian" && v.get<std::string>() != "zero"))
      throw ConfigError("config: noise must be \"gaussian\" or \"zero\"");
    c.zero_noise = v.get<std::string>() == "zero";
  }
  c.threads = static_cast<unsigned>(count_or(j, "threads", 1, where));
  if (c.threads == 0) c.threads = 1;
  if (j.contains("output")) {
    if (!j.at("output").is_string()) throw ConfigError("config: output must be a path string");
    c.output = j.at("output").get<std::string>();
  }

  if (kind == Kind::Figure1) c.subsample = count_or(j, "subsample", 100, where);
  else if (j.contains("subsample")) throw ConfigError("config: \"subsample\" is only used by figure1");
  if (kind == Kind::Bvm) {
    c.grid_points = count_or(j, "grid_points", 200, where);
    if (c.grid_points == 0) throw ConfigError("config: grid_points must be positive");
    c.reference_variance = number_or(j, "reference_variance", 1.0, where);
    if (!(c.reference_variance > 0.0)) throw ConfigError("config: reference_variance must be positive");
  } else if (j.contains("grid_points") || j.contains("reference_variance")) {
    throw ConfigError("config: \"grid_points\" and \"reference_variance\" are only used by bvm");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path, Kind kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, kind);
}

}  // namespace credsets::experiments
