#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "credsets/cli.hpp"
#include "credsets/experiments/output.hpp"

using namespace credsets;
using namespace credsets::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = fs::temp_directory_path() /
                   ("credsets_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json coverage_json() {
  return Json::parse(R"({
    "truth": {"generator": "polynomial", "beta": 1.0},
    "prior": {"gamma": 1.0},
    "n": 200, "K": 200, "alpha": 0.05,
    "norm": {"name": "default-ellipsoid"},
    "draws": 500, "replications": 20, "seed": 11
  })");
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "credsets");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

fs::path write_config(const Json& j, const std::string& name) {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST(Config, MissingAlphaNamesField) {
  auto j = coverage_json();
  j.erase("alpha");
  try {
    parse_config(j, Kind::Coverage);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("\"alpha\""), std::string::npos) << e.what();
  }
}

TEST(Config, RejectsInvalidInput) {
  auto bad = [](auto edit, Kind kind = Kind::Coverage) {
    auto j = coverage_json();
    edit(j);
    EXPECT_THROW(parse_config(j, kind), ConfigError) << j.dump();
  };
  bad([](Json& j) { j["colour"] = "red"; });
  bad([](Json& j) { j["alpha"] = 1.0; });
  bad([](Json& j) { j["blowup"] = 0.5; });
  bad([](Json& j) { j["replications"] = 0; });
  bad([](Json& j) { j["draws"] = -3; });
  bad([](Json& j) { j["prior"] = Json{{"gamma", 1.0}, {"gamma_grid", {1.0}}}; });
  bad([](Json& j) { j["prior"] = Json{{"gamma_grid", {1.0, 0.5}}}; });
  bad([](Json& j) { j["truth"] = Json{{"generator", "wavelet"}}; });
  bad([](Json& j) { j["kind"] = "bvm"; });
  bad([](Json& j) { j.erase("norm"); });
  bad([](Json& j) {
    j.erase("n");
    j["n_grid"] = {100, 50};
    j.erase("alpha");
  }, Kind::Freedman);
  bad([](Json& j) {
    j.erase("n");
    j["n_grid"] = {100, 200};
  }, Kind::Scaling);
  bad([](Json& j) {
    j.erase("n");
    j.erase("alpha");
    j["n_grid"] = {100, 200};
  }, Kind::Freedman);  // ellipsoid norm
}

TEST(Config, SweepAcceptsIncreasingGrid) {
  auto j = coverage_json();
  j.erase("n");
  j.erase("alpha");
  j["n_grid"] = {100, 200};
  j["norm"] = Json{{"name", "l2"}};
  const auto c = parse_config(j, Kind::Freedman);
  EXPECT_EQ(c.n_grid, (std::vector<double>{100, 200}));
  j["n_grid"] = {100, 100};
  j["norm"] = Json{{"name", "default-ellipsoid"}};
  EXPECT_NO_THROW(parse_config(j, Kind::Bvm));
}

TEST(Setup, TruthMustMatchNorm) {
  auto j = coverage_json();
  j["truth"] = Json{{"csv", std::string(CREDSETS_DATA_DIR) + "/lacunary_q2_K300.csv"}};
  j.erase("K");
  j["norm"] = Json{{"name", "default-multiscale"}};
  EXPECT_THROW(make_setup(parse_config(j, Kind::Coverage), 200), ConfigError);
  j["norm"] = Json{{"name", "l2"}};
  EXPECT_EQ(make_setup(parse_config(j, Kind::Coverage), 200).K, 300u);
  j["K"] = 10;
  EXPECT_THROW(make_setup(parse_config(j, Kind::Coverage), 200), ConfigError);
}

TEST(Setup, MultiscaleRoundsKDown) {
  auto j = coverage_json();
  j.erase("K");
  j["norm"] = Json{{"name", "default-multiscale"}};
  const auto s = make_setup(parse_config(j, Kind::Coverage), 1000);
  EXPECT_EQ(s.K, 511u);
  EXPECT_TRUE(s.truth.mode().is_multiscale());
}

TEST(Coverage, HugeBlowupCoversEverything) {
  auto j = coverage_json();
  j["blowup"] = 1e6;
  const auto rep = run_coverage(parse_config(j, Kind::Coverage));
  EXPECT_EQ(rep.coverage, 1.0);
  EXPECT_EQ(rep.covered_count, 20u);
}

TEST(Coverage, ZeroNoiseZeroTruthIsCovered) {
  auto j = coverage_json();
  j["truth"] = Json{{"generator", "zero"}};
  j["noise"] = "zero";
  j["replications"] = 1;
  const auto rep = run_coverage(parse_config(j, Kind::Coverage));
  ASSERT_EQ(rep.records.size(), 1u);
  EXPECT_EQ(rep.records[0].distance, 0.0);
  EXPECT_TRUE(rep.records[0].covered);
}

TEST(Coverage, WilsonIntervalContainsEstimate) {
  for (std::size_t k : {0u, 1u, 7u, 19u, 20u}) {
    const auto w = wilson_interval(k, 20);
    const double p = k / 20.0;
    EXPECT_LE(w.low, p);
    EXPECT_GE(w.high, p);
    EXPECT_GE(w.low, 0.0);
    EXPECT_LE(w.high, 1.0);
  }
  const auto w = wilson_interval(95, 100);
  EXPECT_NEAR(w.low, 0.88828, 1e-4);
  EXPECT_NEAR(w.high, 0.97846, 1e-4);
}

TEST(Coverage, AggregateRecomputedFromCsv) {
  const auto dir = scratch("agg");
  auto j = coverage_json();
  j["replications"] = 40;
  const auto summary = run_experiment(parse_config(j, Kind::Coverage), dir);
  std::ifstream in(dir / "replications.csv");
  const auto table = csv::read(in);
  const auto ci = table.column("covered"), ri = table.column("radius"), di = table.column("distance");
  ASSERT_EQ(table.rows.size(), 40u);
  std::vector<bool> covered;
  for (const auto& row : table.rows) {
    const bool c = csv::parse_int(row[ci]) == 1;
    covered.push_back(c);
    // Stored values reproduce the flag: covered iff distance <= r.
    EXPECT_EQ(c, csv::parse_double(row[di]) <= csv::parse_double(row[ri]));
  }
  const auto count = static_cast<std::size_t>(std::count(covered.begin(), covered.end(), true));
  EXPECT_EQ(static_cast<double>(count) / 40.0, summary["coverage"].get<double>());
  EXPECT_EQ(count, summary["covered"].get<std::size_t>());

  // Larger L never uncovers a replication.
  j["blowup"] = 1.7;
  const auto wider = run_coverage(parse_config(j, Kind::Coverage));
  for (std::size_t i = 0; i < 40; ++i) EXPECT_TRUE(!covered[i] || wider.records[i].covered);
  fs::remove_all(dir);
}

TEST(Determinism, ByteIdenticalAcrossRunsAndThreads) {
  auto j = coverage_json();
  j["norm"] = Json{{"name", "default-multiscale"}};
  j.erase("K");
  auto c1 = parse_config(j, Kind::Coverage);
  auto c3 = c1;
  c3.threads = 3;
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  run_experiment(c1, a);
  run_experiment(c1, b);
  run_experiment(c3, c);
  for (const char* f : {"replications.csv", "summary.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
  }
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Seeds, ReplicationSeedsAreStableAndDistinct) {
  EXPECT_EQ(replication_seed(7, 1), stable_mix(7, 1));
  EXPECT_NE(replication_seed(7, 1), replication_seed(7, 2));
  EXPECT_EQ(sweep_seed(7, 1000.0, 3), sweep_seed(7, 1000.0, 3));
  EXPECT_NE(sweep_seed(7, 1000.0, 3), sweep_seed(7, 2000.0, 3));
}

TEST(Freedman, ZeroNoiseSingleReplicationHasZeroFrequentistVariance) {
  auto j = Json::parse(R"({"truth": {"generator": "polynomial", "beta": 2.0}, "prior": {"gamma": 1.0},
                          "n_grid": [100, 1000], "norm": {"name": "l2"}, "draws": 50, "replications": 1,
                          "noise": "zero"})");
  const auto rep = run_freedman(parse_config(j, Kind::Freedman));
  ASSERT_EQ(rep.rows.size(), 2u);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.frequentist_variance, 0.0);
    EXPECT_GE(row.posterior_variance, 0.0);
    EXPECT_EQ(row.K, static_cast<std::size_t>(row.n));
  }
}

TEST(Freedman, ClosedFormRatioOneInParametricCase) {
  const auto truth = polynomial_signal(2.0, 1.0, 1);
  double prev = 0.0;
  for (double n : {1e2, 1e3, 1e4, 1e6}) {
    const auto m = freedman_moments(truth, DiagonalGaussianPrior(0.5, 1.0, 1), n);
    const double ratio = m.frequentist_variance / m.posterior_variance;
    EXPECT_GT(ratio, prev);
    EXPECT_LT(ratio, 1.0 + 1e-12);
    prev = ratio;
  }
  EXPECT_NEAR(prev, 1.0, 1e-5);
}

TEST(Freedman, SimulatedMomentsTrackClosedForm) {
  auto j = Json::parse(R"({"truth": {"generator": "polynomial", "beta": 2.0}, "prior": {"gamma": 1.0},
                          "n_grid": [50, 200], "norm": {"name": "l2"}, "draws": 400, "replications": 400,
                          "seed": 3})");
  const auto rep = run_freedman(parse_config(j, Kind::Freedman));
  const double R = 400.0;
  for (const auto& row : rep.rows) {
    // Means within 4 standard errors of the exact moments.
    EXPECT_LT(std::abs(row.frequentist_mean - row.exact.frequentist_mean),
              4.0 * std::sqrt(row.exact.frequentist_variance / R));
    EXPECT_LT(std::abs(row.posterior_mean - row.exact.posterior_mean),
              4.0 * std::sqrt(row.exact.posterior_variance / (R * 400.0)));
    EXPECT_NEAR(row.posterior_variance / row.exact.posterior_variance, 1.0, 0.05);
    EXPECT_NEAR(row.variance_ratio / row.exact_variance_ratio, 1.0, 0.3);
  }
}

TEST(Scaling, ConstantForExactlyScaledPosterior) {
  // Variances c / n with n a power of 4: every distance scales by an exact power of 2.
  const auto norm = default_norm("multiscale", 63);
  std::vector<double> scaled;
  for (double n : {16.0, 256.0, 4096.0}) {
    std::vector<double> v(63);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (1.0 + static_cast<double>(k % 5)) / n;
    const PosteriorDistribution post{std::vector<double>(63, 0.0), v, n, IndexMode::multiscale(5)};
    scaled.push_back(std::sqrt(n) * calibrate_radius(posterior_distances(post, norm, 2000, 99), 0.05));
  }
  EXPECT_EQ(scaled[0], scaled[1]);
  EXPECT_EQ(scaled[1], scaled[2]);
}

TEST(Scaling, SmallerAtLargerAlpha) {
  auto j = Json::parse(R"({"truth": {"generator": "polynomial", "beta": 1.0}, "prior": {"gamma": 1.0},
                          "n_grid": [100, 400, 1600], "norm": {"name": "default-multiscale"}, "draws": 400,
                          "replications": 5, "alpha": 0.05})");
  const auto tight = run_radius_scaling(parse_config(j, Kind::Scaling));
  j["alpha"] = 0.5;
  const auto loose = run_radius_scaling(parse_config(j, Kind::Scaling));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LT(loose.rows[i].mean_scaled_radius, tight.rows[i].mean_scaled_radius);
    EXPECT_EQ(loose.rows[i].K, tight.rows[i].K);
  }
  EXPECT_EQ(tight.rows[0].K, 63u);
}

TEST(Bvm, DuplicatedNGivesIdenticalDiscrepancies) {
  auto j = Json::parse(R"({"truth": {"generator": "polynomial", "beta": 1.0}, "prior": {"gamma": 1.0},
                          "n_grid": [300, 300], "K": 100, "norm": {"name": "default-ellipsoid"}, "draws": 500,
                          "replications": 3})");
  const auto rep = run_bvm(parse_config(j, Kind::Bvm));
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].mean_discrepancy, rep.rows[1].mean_discrepancy);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(rep.records[r].discrepancy, rep.records[3 + r].discrepancy);
}

TEST(Bvm, MismatchedReferenceStaysAway) {
  auto j = Json::parse(R"({"truth": {"generator": "polynomial", "beta": 1.0}, "prior": {"gamma": 1.0},
                          "n_grid": [250, 1000], "K": 200, "norm": {"name": "default-ellipsoid"}, "draws": 1000,
                          "replications": 3, "reference_variance": 4.0})");
  for (const auto& row : run_bvm(parse_config(j, Kind::Bvm)).rows) EXPECT_GT(row.mean_discrepancy, 0.2);
}

TEST(Figure1, SmallRunAcceptsNominalFraction) {
  auto j = Json::parse(R"({"truth": {"generator": "polynomial", "beta": 1.0}, "prior": {"gamma": 1.0},
                          "n": 1000, "alpha": 0.05, "draws": 4000, "subsample": 3})");
  const auto rep = run_figure1(parse_config(j, Kind::Figure1));
  EXPECT_EQ(rep.K, 1000u);
  EXPECT_NEAR(rep.l2_accept_fraction, 0.95, 1.0 / std::sqrt(4000.0));
  EXPECT_NEAR(rep.ellipsoid_accept_fraction, 0.95, 1.0 / std::sqrt(4000.0));
  EXPECT_GE(rep.agreement_rate, 0.9);
  EXPECT_EQ(rep.subsample.size(), 3u);

  j["alpha"] = 1e-12;
  const auto all = run_figure1(parse_config(j, Kind::Figure1));
  EXPECT_EQ(all.l2_accept_fraction, 1.0);
  EXPECT_EQ(all.ellipsoid_accept_fraction, 1.0);
}

TEST(Figure1, WritesPlotBundle) {
  const auto dir = scratch("fig1");
  auto j = Json::parse(R"({"truth": {"generator": "polynomial", "beta": 1.0}, "prior": {"gamma": 1.0},
                          "n": 100, "alpha": 0.05, "draws": 200, "subsample": 2})");
  run_experiment(parse_config(j, Kind::Figure1), dir);
  for (const char* f : {"replications.csv", "summary.json", "manifest.json", "truth_posterior.csv",
                        "draws_subsample.csv", "accept_flags.csv", "ellipsoid_weights.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream flags(dir / "accept_flags.csv");
  EXPECT_EQ(csv::read(flags).rows.size(), 200u);
  std::ifstream draws(dir / "draws_subsample.csv");
  EXPECT_EQ(csv::read(draws).rows.size(), 200u);
  const auto manifest = Json::parse(slurp(dir / "manifest.json"));
  for (const char* key : {"version", "config", "master_seed", "replication_seeds", "wall_time_seconds"})
    EXPECT_TRUE(manifest.contains(key)) << key;
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  auto j = coverage_json();
  j["replications"] = 2;
  const auto good = write_config(j, "good.json");
  const auto out = scratch("cli_out");
  EXPECT_EQ(run_cli({"coverage", "--config", good.string(), "--out", out.string()}), 0);
  EXPECT_TRUE(fs::exists(out / "summary.json"));

  j.erase("alpha");
  const auto missing = write_config(j, "missing.json");
  std::string err;
  EXPECT_EQ(run_cli({"coverage", "--config", missing.string(), "--out", out.string()}, nullptr, &err), 1);
  EXPECT_NE(err.find("alpha"), std::string::npos) << err;

  EXPECT_EQ(run_cli({"nonsense"}), 1);
  EXPECT_EQ(run_cli({"coverage", "--config", "/nonexistent/cfg.json", "--out", out.string()}), 1);

  // A regular file where the output directory should be.
  const auto blocker = out / "summary.json";
  EXPECT_EQ(run_cli({"coverage", "--config", good.string(), "--out", (blocker / "sub").string()}), 2);
  fs::remove_all(out);
  fs::remove_all(good.parent_path());
  fs::remove_all(missing.parent_path());
}

TEST(Cli, SeedAndThreadsOverrides) {
  auto j = coverage_json();
  j["replications"] = 4;
  const auto cfg = write_config(j, "cfg.json");
  const auto a = scratch("seed_a"), b = scratch("seed_b"), c = scratch("seed_c");
  ASSERT_EQ(run_cli({"coverage", "--config", cfg.string(), "--out", a.string(), "--seed", "5"}), 0);
  ASSERT_EQ(run_cli({"coverage", "--config", cfg.string(), "--out", b.string(), "--seed", "5", "--threads", "4"}), 0);
  ASSERT_EQ(run_cli({"coverage", "--config", cfg.string(), "--out", c.string(), "--seed", "6"}), 0);
  EXPECT_EQ(slurp(a / "replications.csv"), slurp(b / "replications.csv"));
  EXPECT_NE(slurp(a / "replications.csv"), slurp(c / "replications.csv"));
  EXPECT_EQ(Json::parse(slurp(a / "manifest.json"))["master_seed"], 5);
  for (const auto& d : {a, b, c, cfg.parent_path()}) fs::remove_all(d);
}

TEST(Cli, CheckClassOnLacunarySignal) {
  const auto out = scratch("verdict");
  std::string text;
  const int code = run_cli({"check-class", "--signal", std::string(CREDSETS_DATA_DIR) + "/lacunary_q2_K300.csv",
                            "--params", std::string(CREDSETS_DATA_DIR) + "/lacunary_polished_tail.json", "--out",
                            out.string()},
                           &text);
  ASSERT_EQ(code, 0);
  const auto v = Json::parse(slurp(out / "verdict.json"));
  EXPECT_EQ(v, Json::parse(text));
  EXPECT_EQ(v["pass"], false);
  EXPECT_EQ(v["first_violation_N"], 5);
  EXPECT_EQ(v["condition"], "polished_tail");
  EXPECT_TRUE(v.contains("checked_range"));
  fs::remove_all(out);
}
