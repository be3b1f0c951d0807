#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "credsets/csv.hpp"
#include "credsets/parallel.hpp"
#include "credsets/random.hpp"
#include "credsets/sequence_model.hpp"

namespace credsets {

/// Product prior N(0, lambda_k) with lambda_k = tau^2 k^{-1-2 gamma}.
/// tau = 1 is the standard conjugate prior for a gamma-regular signal.
class DiagonalGaussianPrior {
 public:
  DiagonalGaussianPrior(double gamma, double tau, std::size_t K) : gamma_(gamma), tau_(tau), K_(K) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("prior: gamma must be positive");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("prior: tau must be positive");
    if (K == 0) throw std::invalid_argument("prior: K must be positive");
  }

  double gamma() const { return gamma_; }
  double tau() const { return tau_; }
  std::size_t size() const { return K_; }

  /// lambda_k, k 1-based.
  double variance(std::size_t k) const {
    return tau_ * tau_ * std::pow(static_cast<double>(k), -1.0 - 2.0 * gamma_);
  }

 private:
  double gamma_;
  double tau_;
  std::size_t K_;
};

/// Independent N(means[k], variances[k]) coordinates. compute_posterior fills
/// it from a prior; tests may build degenerate instances directly.
struct PosteriorDistribution {
  std::vector<double> means;
  std::vector<double> variances;
  double n = 1.0;
  IndexMode mode{};

  std::size_t size() const { return means.size(); }

  SignalVector mean_signal() const { return SignalVector(means, mode); }

  std::vector<double> standard_deviations() const {
    std::vector<double> sd(variances.size());
    for (std::size_t k = 0; k < sd.size(); ++k) sd[k] = std::sqrt(variances[k]);
    return sd;
  }
};

/// m_k = lambda_k / (lambda_k + 1/n) Y_k,  v_k = (lambda_k / n) / (lambda_k + 1/n).
inline PosteriorDistribution compute_posterior(const DiagonalGaussianPrior& prior, const Observation& obs) {
  if (prior.size() != obs.size())
    throw std::invalid_argument("compute_posterior: prior has K = " + std::to_string(prior.size()) +
                                ", observation has " + std::to_string(obs.size()));
  check_noise_level(obs.n);
  PosteriorDistribution post{std::vector<double>(obs.size()), std::vector<double>(obs.size()), obs.n, obs.mode};
  for (std::size_t k = 1; k <= obs.size(); ++k) {
    const double n_lambda = obs.n * prior.variance(k);
    const double shrink = n_lambda / (1.0 + n_lambda);
    post.means[k - 1] = shrink * obs.y[k - 1];
    post.variances[k - 1] = shrink / obs.n;
  }
  return post;
}

/// Row-major S x K matrix of draws.
class DrawMatrix {
 public:
  DrawMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t s) const { return {data_.data() + s * cols_, cols_}; }
  std::span<double> row(std::size_t s) { return {data_.data() + s * cols_, cols_}; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// S independent posterior draws, generated row by row from `rng`.
inline DrawMatrix sample_posterior(const PosteriorDistribution& post, std::size_t S, Engine& rng) {
  if (S == 0) throw std::invalid_argument("sample_posterior: draw count must be positive");
  const auto sd = post.standard_deviations();
  StandardNormal normal;
  DrawMatrix draws(S, post.size());
  for (std::size_t s = 0; s < S; ++s) {
    auto row = draws.row(s);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = post.means[k] + sd[k] * normal(rng);
  }
  return draws;
}

/// Draws per independently seeded block in for_each_gaussian_deviation.
inline constexpr std::size_t kDrawBlock = 1024;

/// Streams S draws of (sd_k z_k)_k, z iid N(0,1), without materializing them.
///
/// Draws are generated in blocks of kDrawBlock; block b uses an engine seeded
/// with stable_mix(seed, b), so the s-th deviation is the same for any thread
/// count. `visit(s, deviation)` is called once per draw, concurrently when
/// threads > 1, and must only write to slot s of its outputs.
template <class Visitor>
void for_each_gaussian_deviation(std::span<const double> sd, std::size_t S, std::uint64_t seed, unsigned threads,
                                 Visitor&& visit) {
  if (S == 0) throw std::invalid_argument("draw count must be positive");
  const std::size_t blocks = (S + kDrawBlock - 1) / kDrawBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    Engine rng = make_engine(stable_mix(seed, b));
    StandardNormal normal;
    std::vector<double> deviation(sd.size());
    const std::size_t end = std::min(S, (b + 1) * kDrawBlock);
    for (std::size_t s = b * kDrawBlock; s < end; ++s) {
      for (std::size_t k = 0; k < sd.size(); ++k) deviation[k] = sd[k] * normal(rng);
      visit(s, std::span<const double>(deviation));
    }
  });
}

/// Posterior draws minus the posterior mean, streamed as above.
template <class Visitor>
void for_each_posterior_deviation(const PosteriorDistribution& post, std::size_t S, std::uint64_t seed,
                                  unsigned threads, Visitor&& visit) {
  const auto sd = post.standard_deviations();
  for_each_gaussian_deviation(sd, S, seed, threads, std::forward<Visitor>(visit));
}

/// log p(Y | gamma, tau) with Y_k ~ N(0, lambda_k + 1/n) independently.
inline double marginal_log_likelihood(double gamma, double tau, const Observation& obs) {
  const DiagonalGaussianPrior prior(gamma, tau, obs.size());
  check_noise_level(obs.n);
  const double noise_var = 1.0 / obs.n;
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double sum = 0.0;
  for (std::size_t k = 1; k <= obs.size(); ++k) {
    const double var = prior.variance(k) + noise_var;
    const double y = obs.y[k - 1];
    sum += log_2pi + std::log(var) + y * y / var;
  }
  return -0.5 * sum;
}

/// Grid maximizer of the marginal likelihood; ties go to the smallest gamma.
inline double empirical_bayes_gamma(const Observation& obs, std::span<const double> gamma_grid, double tau) {
  if (gamma_grid.empty()) throw std::invalid_argument("empirical_bayes_gamma: empty grid");
  for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
    if (!(gamma_grid[i] > 0.0)) throw std::invalid_argument("empirical_bayes_gamma: grid values must be positive");
    if (i > 0 && !(gamma_grid[i] > gamma_grid[i - 1]))
      throw std::invalid_argument("empirical_bayes_gamma: grid must be strictly increasing");
  }
  double best_gamma = gamma_grid.front();
  double best = marginal_log_likelihood(best_gamma, tau, obs);
  for (std::size_t i = 1; i < gamma_grid.size(); ++i) {
    const double ll = marginal_log_likelihood(gamma_grid[i], tau, obs);
    if (ll > best) {
      best = ll;
      best_gamma = gamma_grid[i];
    }
  }
  return best_gamma;
}

/// CSV: k,mean,variance.
inline void write_posterior_csv(std::ostream& out, const PosteriorDistribution& post) {
  out << "k,mean,variance\n";
  for (std::size_t k = 0; k < post.size(); ++k)
    out << k + 1 << ',' << csv::format(post.means[k]) << ',' << csv::format(post.variances[k]) << '\n';
}

}  // namespace credsets
