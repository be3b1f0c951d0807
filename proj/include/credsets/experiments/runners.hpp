#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "credsets/conjugate_posterior.hpp"
#include "credsets/credible_sets.hpp"
#include "credsets/experiments/config.hpp"
#include "credsets/random.hpp"
#include "credsets/sequence_model.hpp"
#include "credsets/serialization.hpp"

namespace credsets::experiments {

// Seed layout. Replication r (1-based) of a single-n experiment uses
// stable_mix(master, r). Sweeps first derive a per-n master from the bit
// pattern of n, so a repeated n reruns identical seeds. Inside a replication,
// the observation noise comes from make_engine(seed); posterior and reference
// draws use the derived streams below.
inline constexpr std::uint64_t kPosteriorStream = 1;
inline constexpr std::uint64_t kReferenceStream = 2;

inline std::uint64_t replication_seed(std::uint64_t master, std::size_t replication) {
  return stable_mix(master, replication);
}

inline std::uint64_t sweep_seed(std::uint64_t master, double n, std::size_t replication) {
  return stable_mix(stable_mix(master, std::bit_cast<std::uint64_t>(n)), replication);
}

/// Resolved problem for one value of n.
struct Setup {
  double n = 1.0;
  std::size_t K = 1;
  SignalVector truth;
  NormSpec norm = NormSpec::l2();
};

inline Setup make_setup(const ExperimentConfig& config, double n) {
  const std::string norm_name = config.norm.value("name", std::string{});
  const bool multiscale = norm_name.find("multiscale") != std::string::npos;

  Setup s;
  s.n = n;
  if (config.truth.generator == TruthSpec::Generator::Csv) {
    try {
      s.truth = read_signal_csv(config.truth.csv_path);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("truth: ") + e.what());
    }
    if (config.K && *config.K != s.truth.size())
      throw ConfigError("config: K = " + std::to_string(*config.K) + " but truth csv has " +
                        std::to_string(s.truth.size()) + " coefficients");
    s.K = s.truth.size();
    if (multiscale && !s.truth.mode().is_multiscale())
      throw ConfigError("truth csv uses single indexing, incompatible with a multiscale norm");
  } else {
    if (config.K) {
      s.K = *config.K;
    } else {
      s.K = default_truncation(n);
      if (multiscale) {
        unsigned J = 0;
        while (multiscale_size(J + 1) <= s.K) ++J;
        s.K = multiscale_size(J);
      }
    }
    switch (config.truth.generator) {
      case TruthSpec::Generator::Polynomial:
        s.truth = polynomial_signal(config.truth.beta, config.truth.amplitude, s.K);
        break;
      case TruthSpec::Generator::Lacunary:
        s.truth = lacunary_signal(config.truth.q, s.K);
        break;
      default:
        s.truth = SignalVector::zeros(s.K);
    }
    if (multiscale) {
      const auto J = multiscale_levels_for(s.K);
      if (!J) throw ConfigError("config: multiscale norm needs K = 2^{J+1} - 1, got K = " + std::to_string(s.K));
      s.truth = s.truth.with_mode(IndexMode::multiscale(*J));
    }
  }
  s.norm = norm_from_json(config.norm, s.K);
  try {
    s.norm.check_compatible(s.K, s.truth.mode());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("truth incompatible with norm: ") + e.what());
  }
  return s;
}

/// Observation, selected gamma and posterior of one replication.
struct ReplicationState {
  Observation obs;
  double gamma = 1.0;
  PosteriorDistribution post;
};

inline ReplicationState simulate_replication(const ExperimentConfig& config, const Setup& setup, std::uint64_t seed) {
  ReplicationState st;
  if (config.zero_noise) {
    const std::vector<double> zeros(setup.K, 0.0);
    st.obs = generate_observation(setup.truth, setup.n, zeros, seed);
  } else {
    Engine rng = make_engine(seed);
    st.obs = generate_observation(setup.truth, setup.n, rng, seed);
  }
  st.gamma = config.prior.empirical_bayes() ? empirical_bayes_gamma(st.obs, config.prior.gamma_grid, config.prior.tau)
                                            : config.prior.gamma;
  st.post = compute_posterior(DiagonalGaussianPrior(st.gamma, config.prior.tau, setup.K), st.obs);
  return st;
}

struct SampleMoments {
  double mean = 0.0;
  /// Unbiased; 0 for a single value.
  double variance = 0.0;
};

inline SampleMoments moments(const std::vector<double>& x) {
  SampleMoments m;
  if (x.empty()) return m;
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.variance = ss / static_cast<double>(x.size() - 1);
  }
  return m;
}

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval for `successes` out of `trials` at z.
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054) {
  const double R = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / R;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / R;
  const double center = (p + z2 / (2.0 * R)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / R + z2 / (4.0 * R * R));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// ---------------------------------------------------------------- coverage

struct CoverageRecord {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  bool covered = false;
  double radius = 0.0;
  double distance = 0.0;
  double gamma = 0.0;
};

struct CoverageReport {
  double n = 0.0;
  std::size_t K = 0;
  double alpha = 0.0;
  double blowup = 1.0;
  std::string norm;
  std::vector<CoverageRecord> records;
  std::size_t covered_count = 0;
  double coverage = 0.0;
  Interval wilson;
  double mean_scaled_radius = 0.0;
  double sd_scaled_radius = 0.0;
};

inline CoverageReport run_coverage(const ExperimentConfig& config) {
  const Setup setup = make_setup(config, config.n());
  CoverageReport report;
  report.n = setup.n;
  report.K = setup.K;
  report.alpha = config.alpha;
  report.blowup = config.blowup;
  report.norm = setup.norm.name();
  report.records.resize(config.replications);

  parallel_for(config.replications, config.threads, [&](std::size_t i) {
    const std::size_t r = i + 1;
    const std::uint64_t seed = replication_seed(config.master_seed, r);
    const auto st = simulate_replication(config, setup, seed);
    const auto ball = calibrated_ball(st.post, setup.norm, config.alpha, config.draws,
                                      stable_mix(seed, kPosteriorStream), config.blowup);
    report.records[i] = CoverageRecord{r,          seed, contains(ball, setup.truth), ball.radius,
                                       distance(setup.truth, ball.center, setup.norm), st.gamma};
  });

  std::vector<double> scaled;
  for (const auto& rec : report.records) {
    report.covered_count += rec.covered ? 1 : 0;
    scaled.push_back(std::sqrt(setup.n) * rec.radius);
  }
  const std::size_t R = report.records.size();
  report.coverage = static_cast<double>(report.covered_count) / static_cast<double>(R);
  report.wilson = wilson_interval(report.covered_count, R);
  const auto m = moments(scaled);
  report.mean_scaled_radius = m.mean;
  report.sd_scaled_radius = std::sqrt(m.variance);
  return report;
}

// ---------------------------------------------------------------- freedman

struct FreedmanReplication {
  double n = 0.0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  /// ||E(theta|Y) - theta0||^2
  double squared_error = 0.0;
  /// Mean and unbiased variance of ||theta - E(theta|Y)||^2 over the S draws.
  double posterior_mean = 0.0;
  double posterior_variance = 0.0;
};

/// Closed-form moments of the squared l2 distances under fixed gamma.
struct FreedmanMoments {
  double frequentist_mean = 0.0;
  double frequentist_variance = 0.0;
  double posterior_mean = 0.0;
  double posterior_variance = 0.0;
};

/// With s_k = n lambda_k / (1 + n lambda_k), the estimation error is
/// (s_k - 1) theta_k + s_k g_k / sqrt(n) and the posterior deviation has
/// variance s_k / n, so both squared norms are sums of noncentral chi-squares.
inline FreedmanMoments freedman_moments(const SignalVector& truth, const DiagonalGaussianPrior& prior, double n) {
  FreedmanMoments m;
  for (std::size_t k = 1; k <= truth.size(); ++k) {
    const double nl = n * prior.variance(k);
    const double s = nl / (1.0 + nl);
    const double b = (s - 1.0) * truth.at(k);
    const double c2 = s * s / n;
    const double v = s / n;
    m.frequentist_mean += b * b + c2;
    m.frequentist_variance += 2.0 * c2 * c2 + 4.0 * b * b * c2;
    m.posterior_mean += v;
    m.posterior_variance += 2.0 * v * v;
  }
  return m;
}

struct FreedmanRow {
  double n = 0.0;
  std::size_t K = 0;
  double frequentist_mean = 0.0;
  double frequentist_variance = 0.0;
  double posterior_mean = 0.0;
  double posterior_variance = 0.0;
  double mean_ratio = 0.0;
  double variance_ratio = 0.0;
  FreedmanMoments exact;
  double exact_variance_ratio = 0.0;
};

struct FreedmanReport {
  std::vector<FreedmanRow> rows;
  std::vector<FreedmanReplication> records;
};

inline FreedmanReport run_freedman(const ExperimentConfig& config) {
  if (config.prior.empirical_bayes()) throw ConfigError("config: freedman needs a fixed prior gamma");
  std::vector<Setup> setups;
  for (double n : config.n_grid) setups.push_back(make_setup(config, n));

  const std::size_t R = config.replications;
  FreedmanReport report;
  report.records.resize(setups.size() * R);
  parallel_for(report.records.size(), config.threads, [&](std::size_t idx) {
    const Setup& setup = setups[idx / R];
    const std::size_t r = idx % R + 1;
    const std::uint64_t seed = sweep_seed(config.master_seed, setup.n, r);
    const auto st = simulate_replication(config, setup, seed);
    std::vector<double> sq(config.draws);
    for_each_posterior_deviation(st.post, config.draws, stable_mix(seed, kPosteriorStream), 1,
                                 [&](std::size_t s, std::span<const double> dev) { sq[s] = l2_norm_squared(dev); });
    const auto pm = moments(sq);
    double err = 0.0;
    for (std::size_t k = 0; k < setup.K; ++k) {
      const double d = st.post.means[k] - setup.truth.coeffs()[k];
      err += d * d;
    }
    report.records[idx] = FreedmanReplication{setup.n, r, seed, err, pm.mean, pm.variance};
  });

  for (std::size_t i = 0; i < setups.size(); ++i) {
    std::vector<double> err, pmean, pvar;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& rec = report.records[i * R + r];
      err.push_back(rec.squared_error);
      pmean.push_back(rec.posterior_mean);
      pvar.push_back(rec.posterior_variance);
    }
    FreedmanRow row;
    row.n = setups[i].n;
    row.K = setups[i].K;
    const auto fm = moments(err);
    row.frequentist_mean = fm.mean;
    row.frequentist_variance = fm.variance;
    row.posterior_mean = moments(pmean).mean;
    row.posterior_variance = moments(pvar).mean;
    row.mean_ratio = row.frequentist_mean / row.posterior_mean;
    row.variance_ratio = row.frequentist_variance / row.posterior_variance;
    row.exact = freedman_moments(setups[i].truth, DiagonalGaussianPrior(config.prior.gamma, config.prior.tau, row.K),
                                 row.n);
    row.exact_variance_ratio = row.exact.frequentist_variance / row.exact.posterior_variance;
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------- scaling

struct ScalingReplication {
  double n = 0.0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  double radius = 0.0;
  double scaled_radius = 0.0;
};

struct ScalingRow {
  double n = 0.0;
  std::size_t K = 0;
  double mean_scaled_radius = 0.0;
  double sd_scaled_radius = 0.0;
  std::size_t replications = 0;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  std::vector<ScalingReplication> records;
};

inline ScalingReport run_radius_scaling(const ExperimentConfig& config) {
  std::vector<Setup> setups;
  for (double n : config.n_grid) setups.push_back(make_setup(config, n));
  const std::size_t R = config.replications;
  ScalingReport report;
  report.records.resize(setups.size() * R);
  parallel_for(report.records.size(), config.threads, [&](std::size_t idx) {
    const Setup& setup = setups[idx / R];
    const std::size_t r = idx % R + 1;
    const std::uint64_t seed = sweep_seed(config.master_seed, setup.n, r);
    const auto st = simulate_replication(config, setup, seed);
    const double radius = calibrate_radius(
        posterior_distances(st.post, setup.norm, config.draws, stable_mix(seed, kPosteriorStream)), config.alpha);
    report.records[idx] = ScalingReplication{setup.n, r, seed, radius, std::sqrt(setup.n) * radius};
  });
  for (std::size_t i = 0; i < setups.size(); ++i) {
    std::vector<double> scaled;
    for (std::size_t r = 0; r < R; ++r) scaled.push_back(report.records[i * R + r].scaled_radius);
    const auto m = moments(scaled);
    report.rows.push_back(ScalingRow{setups[i].n, setups[i].K, m.mean, std::sqrt(m.variance), R});
  }
  return report;
}

// ---------------------------------------------------------------- bvm

struct BvmReplication {
  double n = 0.0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  double discrepancy = 0.0;
};

struct BvmRow {
  double n = 0.0;
  std::size_t K = 0;
  double mean_discrepancy = 0.0;
  /// Standard error of the mean over replications.
  double std_error = 0.0;
  std::size_t replications = 0;
};

struct BvmReport {
  std::vector<BvmRow> rows;
  std::vector<BvmReplication> records;
};

inline BvmReport run_bvm(const ExperimentConfig& config) {
  std::vector<Setup> setups;
  for (double n : config.n_grid) setups.push_back(make_setup(config, n));
  const std::size_t R = config.replications;
  BvmReport report;
  report.records.resize(setups.size() * R);
  parallel_for(report.records.size(), config.threads, [&](std::size_t idx) {
    const Setup& setup = setups[idx / R];
    const std::size_t r = idx % R + 1;
    const std::uint64_t seed = sweep_seed(config.master_seed, setup.n, r);
    const auto st = simulate_replication(config, setup, seed);
    auto post = posterior_distances(st.post, setup.norm, config.draws, stable_mix(seed, kPosteriorStream));
    for (auto& d : post) d *= std::sqrt(setup.n);
    const auto ref = white_noise_distances(setup.norm, setup.K, setup.truth.mode(), config.draws,
                                           stable_mix(seed, kReferenceStream), config.reference_variance);
    const auto grid = default_bvm_grid(post, ref, config.grid_points);
    report.records[idx] = BvmReplication{setup.n, r, seed, bvm_discrepancy(post, ref, grid)};
  });
  for (std::size_t i = 0; i < setups.size(); ++i) {
    std::vector<double> d;
    for (std::size_t r = 0; r < R; ++r) d.push_back(report.records[i * R + r].discrepancy);
    const auto m = moments(d);
    report.rows.push_back(BvmRow{setups[i].n, setups[i].K, m.mean, std::sqrt(m.variance / static_cast<double>(R)), R});
  }
  return report;
}

// ---------------------------------------------------------------- figure 1

/// One replication with many draws, accept/reject flags under the l2 ball and
/// the ellipsoid ball, for plotting both credible sets.
struct Figure1Report {
  double n = 0.0;
  std::size_t K = 0;
  std::size_t draws = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  SignalVector truth;
  PosteriorDistribution posterior;
  NormSpec ellipsoid = NormSpec::l2();
  double l2_radius = 0.0;
  double ellipsoid_radius = 0.0;
  std::vector<double> l2_distances;
  std::vector<double> ellipsoid_distances;
  /// First `subsample` draws, in draw order.
  std::vector<std::vector<double>> subsample;
  double l2_accept_fraction = 0.0;
  double ellipsoid_accept_fraction = 0.0;
  /// Fraction of draws on which both balls make the same decision.
  double agreement_rate = 0.0;
  bool l2_covers_truth = false;
  bool ellipsoid_covers_truth = false;

  bool l2_accepts(std::size_t s) const { return l2_distances[s] <= l2_radius; }
  bool ellipsoid_accepts(std::size_t s) const { return ellipsoid_distances[s] <= ellipsoid_radius; }
};

inline Figure1Report run_figure1(const ExperimentConfig& config) {
  const Setup setup = make_setup(config, config.n());
  if (!setup.norm.is_ellipsoid()) throw ConfigError("figure1: norm must be an ellipsoid");
  Figure1Report rep;
  rep.n = setup.n;
  rep.K = setup.K;
  rep.draws = config.draws;
  rep.alpha = config.alpha;
  rep.seed = replication_seed(config.master_seed, 1);
  rep.truth = setup.truth;
  rep.ellipsoid = setup.norm;

  const auto st = simulate_replication(config, setup, rep.seed);
  rep.gamma = st.gamma;
  rep.posterior = st.post;

  const std::size_t S = config.draws;
  const std::size_t keep = std::min(config.subsample, S);
  rep.l2_distances.assign(S, 0.0);
  rep.ellipsoid_distances.assign(S, 0.0);
  rep.subsample.assign(keep, std::vector<double>(setup.K));
  const NormSpec l2 = NormSpec::l2();
  for_each_posterior_deviation(st.post, S, stable_mix(rep.seed, kPosteriorStream), config.threads,
                               [&](std::size_t s, std::span<const double> dev) {
                                 rep.l2_distances[s] = l2(dev);
                                 rep.ellipsoid_distances[s] = setup.norm(dev);
                                 if (s < keep)
                                   for (std::size_t k = 0; k < dev.size(); ++k)
                                     rep.subsample[s][k] = st.post.means[k] + dev[k];
                               });
  rep.l2_radius = calibrate_radius(rep.l2_distances, config.alpha);
  rep.ellipsoid_radius = calibrate_radius(rep.ellipsoid_distances, config.alpha);

  std::size_t l2_in = 0, ell_in = 0, agree = 0;
  for (std::size_t s = 0; s < S; ++s) {
    const bool a = rep.l2_accepts(s), b = rep.ellipsoid_accepts(s);
    l2_in += a;
    ell_in += b;
    agree += a == b;
  }
  rep.l2_accept_fraction = static_cast<double>(l2_in) / static_cast<double>(S);
  rep.ellipsoid_accept_fraction = static_cast<double>(ell_in) / static_cast<double>(S);
  rep.agreement_rate = static_cast<double>(agree) / static_cast<double>(S);

  const auto center = st.post.mean_signal();
  rep.l2_covers_truth = contains(make_credible_ball(center, rep.l2_radius, l2, config.alpha), setup.truth);
  rep.ellipsoid_covers_truth =
      contains(make_credible_ball(center, rep.ellipsoid_radius, setup.norm, config.alpha), setup.truth);
  return rep;
}

}  // namespace credsets::experiments
