#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "credsets/conjugate_posterior.hpp"
#include "credsets/csv.hpp"
#include "credsets/experiments/config.hpp"
#include "credsets/experiments/runners.hpp"
#include "credsets/serialization.hpp"

#ifndef CREDSETS_VERSION
#define CREDSETS_VERSION "unknown"
#endif

namespace credsets::experiments {

namespace fs = std::filesystem;

/// Failure to create or write output files.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void prepare_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw OutputError("cannot create output directory '" + dir.string() + "'");
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot write '" + path.string() + "'");
  out << content;
  if (!out.flush()) throw OutputError("failed writing '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

using csv::format;

// ---------------------------------------------------------------- coverage

inline std::string coverage_csv(const CoverageReport& rep) {
  std::ostringstream out;
  out << "replication,seed,covered,radius,distance,gamma\n";
  for (const auto& r : rep.records)
    out << r.replication << ',' << r.seed << ',' << (r.covered ? 1 : 0) << ',' << format(r.radius) << ','
        << format(r.distance) << ',' << format(r.gamma) << '\n';
  return out.str();
}

inline Json summary_json(const CoverageReport& rep) {
  Json j;
  j["kind"] = "coverage";
  j["n"] = rep.n;
  j["K"] = rep.K;
  j["norm"] = rep.norm;
  j["alpha"] = rep.alpha;
  j["blowup"] = rep.blowup;
  j["replications"] = rep.records.size();
  j["covered"] = rep.covered_count;
  j["coverage"] = rep.coverage;
  j["wilson95"] = Json::array({rep.wilson.low, rep.wilson.high});
  j["mean_sqrt_n_radius"] = rep.mean_scaled_radius;
  j["sd_sqrt_n_radius"] = rep.sd_scaled_radius;
  return j;
}

// ---------------------------------------------------------------- freedman

inline std::string freedman_replications_csv(const FreedmanReport& rep) {
  std::ostringstream out;
  out << "n,replication,seed,squared_error,posterior_mean_sq,posterior_var_sq\n";
  for (const auto& r : rep.records)
    out << format(r.n) << ',' << r.replication << ',' << r.seed << ',' << format(r.squared_error) << ','
        << format(r.posterior_mean) << ',' << format(r.posterior_variance) << '\n';
  return out.str();
}

inline std::string freedman_table_csv(const FreedmanReport& rep) {
  std::ostringstream out;
  out << "n,K,freq_mean,freq_var,post_mean,post_var,mean_ratio,var_ratio,"
         "exact_freq_mean,exact_freq_var,exact_post_mean,exact_post_var,exact_var_ratio\n";
  for (const auto& r : rep.rows)
    out << format(r.n) << ',' << r.K << ',' << format(r.frequentist_mean) << ',' << format(r.frequentist_variance)
        << ',' << format(r.posterior_mean) << ',' << format(r.posterior_variance) << ',' << format(r.mean_ratio)
        << ',' << format(r.variance_ratio) << ',' << format(r.exact.frequentist_mean) << ','
        << format(r.exact.frequentist_variance) << ',' << format(r.exact.posterior_mean) << ','
        << format(r.exact.posterior_variance) << ',' << format(r.exact_variance_ratio) << '\n';
  return out.str();
}

inline Json summary_json(const FreedmanReport& rep) {
  Json j;
  j["kind"] = "freedman";
  j["rows"] = Json::array();
  for (const auto& r : rep.rows)
    j["rows"].push_back({{"n", r.n},
                         {"K", r.K},
                         {"var_ratio", r.variance_ratio},
                         {"mean_ratio", r.mean_ratio},
                         {"exact_var_ratio", r.exact_variance_ratio}});
  return j;
}

// ---------------------------------------------------------------- scaling

inline std::string scaling_replications_csv(const ScalingReport& rep) {
  std::ostringstream out;
  out << "n,replication,seed,radius,sqrt_n_radius\n";
  for (const auto& r : rep.records)
    out << format(r.n) << ',' << r.replication << ',' << r.seed << ',' << format(r.radius) << ','
        << format(r.scaled_radius) << '\n';
  return out.str();
}

inline std::string scaling_table_csv(const ScalingReport& rep) {
  std::ostringstream out;
  out << "n,K,mean_sqrt_n_radius,sd_sqrt_n_radius,replications\n";
  for (const auto& r : rep.rows)
    out << format(r.n) << ',' << r.K << ',' << format(r.mean_scaled_radius) << ',' << format(r.sd_scaled_radius)
        << ',' << r.replications << '\n';
  return out.str();
}

inline Json summary_json(const ScalingReport& rep) {
  Json j;
  j["kind"] = "scaling";
  j["rows"] = Json::array();
  for (const auto& r : rep.rows)
    j["rows"].push_back({{"n", r.n}, {"K", r.K}, {"mean_sqrt_n_radius", r.mean_scaled_radius}, {"sd", r.sd_scaled_radius}});
  return j;
}

// ---------------------------------------------------------------- bvm

inline std::string bvm_replications_csv(const BvmReport& rep) {
  std::ostringstream out;
  out << "n,replication,seed,discrepancy\n";
  for (const auto& r : rep.records)
    out << format(r.n) << ',' << r.replication << ',' << r.seed << ',' << format(r.discrepancy) << '\n';
  return out.str();
}

inline std::string bvm_table_csv(const BvmReport& rep) {
  std::ostringstream out;
  out << "n,K,mean_discrepancy,std_error,replications\n";
  for (const auto& r : rep.rows)
    out << format(r.n) << ',' << r.K << ',' << format(r.mean_discrepancy) << ',' << format(r.std_error) << ','
        << r.replications << '\n';
  return out.str();
}

inline Json summary_json(const BvmReport& rep) {
  Json j;
  j["kind"] = "bvm";
  j["rows"] = Json::array();
  for (const auto& r : rep.rows)
    j["rows"].push_back({{"n", r.n}, {"K", r.K}, {"discrepancy", r.mean_discrepancy}, {"std_error", r.std_error}});
  return j;
}

// ---------------------------------------------------------------- figure 1

inline std::string figure1_truth_csv(const Figure1Report& rep) {
  std::ostringstream out;
  out << "k,truth,posterior_mean,posterior_variance\n";
  for (std::size_t k = 0; k < rep.K; ++k)
    out << k + 1 << ',' << format(rep.truth.coeffs()[k]) << ',' << format(rep.posterior.means[k]) << ','
        << format(rep.posterior.variances[k]) << '\n';
  return out.str();
}

/// Long format: one row per (draw, coefficient).
inline std::string figure1_draws_csv(const Figure1Report& rep) {
  std::ostringstream out;
  out << "draw,k,value,l2_accept,ellipsoid_accept\n";
  for (std::size_t s = 0; s < rep.subsample.size(); ++s)
    for (std::size_t k = 0; k < rep.K; ++k)
      out << s + 1 << ',' << k + 1 << ',' << format(rep.subsample[s][k]) << ',' << (rep.l2_accepts(s) ? 1 : 0)
          << ',' << (rep.ellipsoid_accepts(s) ? 1 : 0) << '\n';
  return out.str();
}

inline std::string figure1_flags_csv(const Figure1Report& rep) {
  std::ostringstream out;
  out << "draw,l2_distance,ellipsoid_distance,l2_accept,ellipsoid_accept\n";
  for (std::size_t s = 0; s < rep.draws; ++s)
    out << s + 1 << ',' << format(rep.l2_distances[s]) << ',' << format(rep.ellipsoid_distances[s]) << ','
        << (rep.l2_accepts(s) ? 1 : 0) << ',' << (rep.ellipsoid_accepts(s) ? 1 : 0) << '\n';
  return out.str();
}

inline std::string figure1_replications_csv(const Figure1Report& rep) {
  std::ostringstream out;
  out << "replication,seed,gamma,l2_radius,ellipsoid_radius,l2_covered,ellipsoid_covered\n";
  out << 1 << ',' << rep.seed << ',' << format(rep.gamma) << ',' << format(rep.l2_radius) << ','
      << format(rep.ellipsoid_radius) << ',' << (rep.l2_covers_truth ? 1 : 0) << ','
      << (rep.ellipsoid_covers_truth ? 1 : 0) << '\n';
  return out.str();
}

inline Json summary_json(const Figure1Report& rep) {
  Json j;
  j["kind"] = "figure1";
  j["n"] = rep.n;
  j["K"] = rep.K;
  j["draws"] = rep.draws;
  j["alpha"] = rep.alpha;
  j["l2_ball"] = to_json(make_credible_ball(rep.posterior.mean_signal(), rep.l2_radius, NormSpec::l2(), rep.alpha),
                         "truth_posterior.csv#posterior_mean");
  j["ellipsoid_ball"] = to_json(make_credible_ball(rep.posterior.mean_signal(), rep.ellipsoid_radius, rep.ellipsoid,
                                                   rep.alpha),
                                "truth_posterior.csv#posterior_mean");
  j["ellipsoid_ball"]["norm"].erase("weights");
  j["ellipsoid_ball"]["norm"]["weights_ref"] = "ellipsoid_weights.csv";
  j["l2_accept_fraction"] = rep.l2_accept_fraction;
  j["ellipsoid_accept_fraction"] = rep.ellipsoid_accept_fraction;
  j["agreement_rate"] = rep.agreement_rate;
  j["l2_covers_truth"] = rep.l2_covers_truth;
  j["ellipsoid_covers_truth"] = rep.ellipsoid_covers_truth;
  return j;
}

// ---------------------------------------------------------------- driver

/// Runs `config` and writes its artifacts into `dir`:
/// replications.csv, summary.json, kind-specific CSVs and manifest.json.
/// Only manifest.json depends on thread count and timing.
inline Json run_experiment(const ExperimentConfig& config, const fs::path& dir) {
  prepare_directory(dir);
  const auto started = std::chrono::steady_clock::now();
  Json summary;
  Json seeds = Json::array();

  switch (config.kind) {
    case Kind::Coverage: {
      const auto rep = run_coverage(config);
      write_file(dir / "replications.csv", coverage_csv(rep));
      summary = summary_json(rep);
      for (const auto& r : rep.records) seeds.push_back(r.seed);
      break;
    }
    case Kind::Freedman: {
      const auto rep = run_freedman(config);
      write_file(dir / "replications.csv", freedman_replications_csv(rep));
      write_file(dir / "freedman.csv", freedman_table_csv(rep));
      summary = summary_json(rep);
      for (const auto& r : rep.records) seeds.push_back(r.seed);
      break;
    }
    case Kind::Scaling: {
      const auto rep = run_radius_scaling(config);
      write_file(dir / "replications.csv", scaling_replications_csv(rep));
      write_file(dir / "scaling.csv", scaling_table_csv(rep));
      summary = summary_json(rep);
      for (const auto& r : rep.records) seeds.push_back(r.seed);
      break;
    }
    case Kind::Bvm: {
      const auto rep = run_bvm(config);
      write_file(dir / "replications.csv", bvm_replications_csv(rep));
      write_file(dir / "bvm.csv", bvm_table_csv(rep));
      summary = summary_json(rep);
      for (const auto& r : rep.records) seeds.push_back(r.seed);
      break;
    }
    case Kind::Figure1: {
      const auto rep = run_figure1(config);
      write_file(dir / "replications.csv", figure1_replications_csv(rep));
      write_file(dir / "truth_posterior.csv", figure1_truth_csv(rep));
      write_file(dir / "draws_subsample.csv", figure1_draws_csv(rep));
      write_file(dir / "accept_flags.csv", figure1_flags_csv(rep));
      std::ostringstream weights;
      write_weights_csv(weights, rep.ellipsoid.ellipsoid_spec());
      write_file(dir / "ellipsoid_weights.csv", weights.str());
      summary = summary_json(rep);
      seeds.push_back(rep.seed);
      break;
    }
  }
  write_json(dir / "summary.json", summary);

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  Json manifest;
  manifest["tool"] = "credsets";
  manifest["version"] = CREDSETS_VERSION;
  manifest["kind"] = to_string(config.kind);
  manifest["config"] = config.source;
  manifest["master_seed"] = config.master_seed;
  manifest["replication_seeds"] = seeds;
  manifest["threads"] = config.threads;
  manifest["wall_time_seconds"] = seconds;
  write_json(dir / "manifest.json", manifest);
  return summary;
}

}  // namespace credsets::experiments
