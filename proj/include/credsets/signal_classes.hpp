#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "credsets/norms.hpp"
#include "credsets/sequence_model.hpp"

namespace credsets {

// Decision procedures for signal-strength classes on a truncated signal.
//
// Every "for all N >= N0" condition is only checked for the N whose block
// fits inside 1..K; CheckResult records that range. Sobolev norms are taken
// over the truncation. Block limits are rounded as floor(rho N) and
// ceil(N^{1-eps}), both inclusive.

/// Verdict of one class check.
struct CheckResult {
  bool pass = true;
  /// First N at which the block inequality fails, if any.
  std::optional<std::size_t> first_violation;
  /// Inclusive range of N that was examined.
  std::size_t checked_from = 0;
  std::size_t checked_to = 0;
  /// Empty on pass; otherwise what failed.
  std::string reason;
};

/// Self-similarity: sum_{k=N}^{rho N} theta_k^2 >= eps ||theta||_{S^beta}^2 N^{-2 beta}.
/// A finite `radius` additionally requires ||theta||_{S^beta} <= radius.
struct SelfSimilarParams {
  double beta = 1.0;
  double radius = std::numeric_limits<double>::infinity();
  double epsilon = 0.1;
  double rho = 3.0;
  std::size_t start = 1;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("self-similar: beta must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("self-similar: B must be positive");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("self-similar: eps must lie in (0, 1]");
    if (!(rho >= 2.0)) throw std::invalid_argument("self-similar: rho must be >= 2");
    if (start < 1) throw std::invalid_argument("self-similar: N0 must be >= 1");
  }
};

/// Polished tail: sum_{k=N}^{rho N} theta_k^2 >= L0^{-1} sum_{k>=N} theta_k^2.
struct PolishedTailParams {
  double tail_constant = 2.0;  // L0
  double rho = 3.0;
  std::size_t start = 1;

  void validate() const {
    if (!(tail_constant > 0.0)) throw std::invalid_argument("polished tail: L0 must be positive");
    if (!(rho >= 2.0)) throw std::invalid_argument("polished tail: rho must be >= 2");
    if (start < 1) throw std::invalid_argument("polished tail: N0 must be >= 1");
  }
};

/// 16 * 2^{2 beta + 1}.
inline double relaxed_block_constant(double beta) { return 16.0 * std::exp2(2.0 * beta + 1.0); }

/// Relaxed self-similarity over windows [N^{1-eps}, N] with constant c_beta,
/// restricted to b <= ||theta||_{S^beta} <= B (b = 0 disables the lower bound).
struct RelaxedSelfSimilarParams {
  double beta = 1.0;
  double radius = 1.0;        // B
  double lower_radius = 0.0;  // b
  double epsilon = 0.5;
  std::size_t start = 1;

  double block_constant() const { return relaxed_block_constant(beta); }

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("relaxed self-similar: beta must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("relaxed self-similar: B must be positive");
    if (!(lower_radius >= 0.0 && lower_radius < radius))
      throw std::invalid_argument("relaxed self-similar: need 0 <= b < B");
    if (!(epsilon > 0.0 && epsilon <= 1.0))
      throw std::invalid_argument("relaxed self-similar: eps must lie in (0, 1]");
    if (start < 1) throw std::invalid_argument("relaxed self-similar: N0 must be >= 1");
  }
};

namespace detail {

// x rounded to an integer when within 1e-9 relative of one, so that products
// like 3 * 7 or powers like 8^{1/3} do not land on the wrong side.
inline double snap(double x) {
  const double nearest = std::round(x);
  return std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x)) ? nearest : x;
}

inline std::size_t block_end(double rho, std::size_t N) {
  return static_cast<std::size_t>(std::floor(snap(rho * static_cast<double>(N))));
}

inline std::size_t window_start(std::size_t N, double epsilon) {
  const double x = std::ceil(snap(std::pow(static_cast<double>(N), 1.0 - epsilon)));
  return std::max<std::size_t>(1, static_cast<std::size_t>(x));
}

/// prefix[k] = theta_1^2 + ... + theta_k^2 in extended precision.
inline std::vector<long double> energy_prefix(std::span<const double> theta) {
  std::vector<long double> prefix(theta.size() + 1, 0.0L);
  for (std::size_t k = 1; k <= theta.size(); ++k) {
    const long double v = theta[k - 1];
    prefix[k] = prefix[k - 1] + v * v;
  }
  return prefix;
}

inline double energy(const std::vector<long double>& prefix, std::size_t from, std::size_t to) {
  return static_cast<double>(prefix[to] - prefix[from - 1]);
}

}  // namespace detail

inline bool in_sobolev_ball(const SignalVector& theta, double beta, double radius) {
  if (!(beta >= 0.0)) throw std::invalid_argument("in_sobolev_ball: beta must be >= 0");
  if (!(radius > 0.0)) throw std::invalid_argument("in_sobolev_ball: B must be positive");
  return sobolev_norm(theta, beta) <= radius;
}

/// sum_{k>=N} theta_k^2 <= ||theta||_{S^beta}^2 N^{-2 beta} for N = 1..K.
///
/// The inequality always holds, so a violation means a numerical bug. The
/// comparison allows 1e-12 relative rounding slack.
inline CheckResult check_tail_bound(const SignalVector& theta, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("check_tail_bound: beta must be >= 0");
  const auto x = theta.coeffs();
  const std::size_t K = x.size();
  const double sob2 = sobolev_norm_squared(x, beta);
  const auto prefix = detail::energy_prefix(x);
  CheckResult result{true, std::nullopt, 1, K, {}};
  for (std::size_t N = 1; N <= K; ++N) {
    const double tail = detail::energy(prefix, N, K);
    const double bound = sob2 * std::pow(static_cast<double>(N), -2.0 * beta);
    if (tail > bound * (1.0 + 1e-12)) {
      result.pass = false;
      result.first_violation = N;
      result.reason = "tail energy exceeds Sobolev envelope";
      break;
    }
  }
  return result;
}

inline CheckResult check_self_similar(const SignalVector& theta, const SelfSimilarParams& params) {
  params.validate();
  const auto x = theta.coeffs();
  const std::size_t K = x.size();
  const std::size_t last = static_cast<std::size_t>(std::floor(detail::snap(static_cast<double>(K) / params.rho)));
  if (last < params.start)
    throw std::invalid_argument("check_self_similar: no block [N0, rho N0] fits in K = " + std::to_string(K));
  CheckResult result{true, std::nullopt, params.start, last, {}};
  const double sob2 = sobolev_norm_squared(x, params.beta);
  if (std::isfinite(params.radius) && std::sqrt(sob2) > params.radius) {
    result.pass = false;
    result.reason = "outside Sobolev ball";
    return result;
  }
  const auto prefix = detail::energy_prefix(x);
  for (std::size_t N = params.start; N <= last; ++N) {
    const double block = detail::energy(prefix, N, detail::block_end(params.rho, N));
    const double required = params.epsilon * sob2 * std::pow(static_cast<double>(N), -2.0 * params.beta);
    if (!(block >= required)) {
      result.pass = false;
      result.first_violation = N;
      result.reason = "block energy below eps * Sobolev envelope";
      break;
    }
  }
  return result;
}

inline CheckResult check_polished_tail(const SignalVector& theta, const PolishedTailParams& params) {
  params.validate();
  const auto x = theta.coeffs();
  const std::size_t K = x.size();
  const std::size_t last = static_cast<std::size_t>(std::floor(detail::snap(static_cast<double>(K) / params.rho)));
  if (last < params.start)
    throw std::invalid_argument("check_polished_tail: no block [N0, rho N0] fits in K = " + std::to_string(K));
  CheckResult result{true, std::nullopt, params.start, last, {}};
  const auto prefix = detail::energy_prefix(x);
  for (std::size_t N = params.start; N <= last; ++N) {
    const double block = detail::energy(prefix, N, detail::block_end(params.rho, N));
    const double tail = detail::energy(prefix, N, K);
    if (!(block >= tail / params.tail_constant)) {
      result.pass = false;
      result.first_violation = N;
      result.reason = "block energy below tail / L0";
      break;
    }
  }
  return result;
}

inline CheckResult check_relaxed_self_similar(const SignalVector& theta, const RelaxedSelfSimilarParams& params) {
  params.validate();
  const auto x = theta.coeffs();
  const std::size_t K = x.size();
  if (params.start > K) throw std::invalid_argument("check_relaxed_self_similar: N0 exceeds K");
  CheckResult result{true, std::nullopt, params.start, K, {}};
  const double sob2 = sobolev_norm_squared(x, params.beta);
  const double sob = std::sqrt(sob2);
  if (sob > params.radius) {
    result.pass = false;
    result.reason = "outside Sobolev ball";
    return result;
  }
  if (params.lower_radius > 0.0 && sob < params.lower_radius) {
    result.pass = false;
    result.reason = "Sobolev norm below lower bound b";
    return result;
  }
  const double c = params.block_constant();
  const auto prefix = detail::energy_prefix(x);
  for (std::size_t N = params.start; N <= K; ++N) {
    const double block = detail::energy(prefix, detail::window_start(N, params.epsilon), N);
    const double required = c * sob2 * std::pow(static_cast<double>(N), -2.0 * params.beta);
    if (!(block >= required)) {
      result.pass = false;
      result.first_violation = N;
      result.reason = "window energy below c_beta * Sobolev envelope";
      break;
    }
  }
  return result;
}

struct EpsilonBounds {
  /// eps(beta) must stay below this for adaptive confidence balls to exist.
  double necessary_sup = 0.5;
  /// eps(beta) below this suffices.
  double sufficient_sup = 0.0;
};

inline EpsilonBounds epsilon_bounds(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("epsilon_bounds: beta must be positive");
  return {0.5, beta / (2.0 * beta + 0.5)};
}

inline void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("regularity scan: empty beta grid");
}

/// Grid values of beta at which check_self_similar passes.
inline std::vector<double> detect_regularity(const SignalVector& theta, std::span<const double> beta_grid,
                                             double rho, double epsilon, std::size_t start) {
  check_grid(beta_grid);
  std::vector<double> passing;
  for (double beta : beta_grid) {
    SelfSimilarParams p;
    p.beta = beta;
    p.epsilon = epsilon;
    p.rho = rho;
    p.start = start;
    if (check_self_similar(theta, p).pass) passing.push_back(beta);
  }
  return passing;
}

/// Grid values of beta at which check_relaxed_self_similar passes with a
/// common Sobolev radius B.
inline std::vector<double> detect_regularity_relaxed(const SignalVector& theta, std::span<const double> beta_grid,
                                                     double epsilon, std::size_t start, double radius) {
  check_grid(beta_grid);
  std::vector<double> passing;
  for (double beta : beta_grid) {
    RelaxedSelfSimilarParams p;
    p.beta = beta;
    p.radius = radius;
    p.epsilon = epsilon;
    p.start = start;
    if (check_relaxed_self_similar(theta, p).pass) passing.push_back(beta);
  }
  return passing;
}

}  // namespace credsets
