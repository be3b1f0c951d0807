#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "credsets/conjugate_posterior.hpp"
#include "credsets/norms.hpp"
#include "credsets/sequence_model.hpp"

namespace credsets {

/// One of the three credible-set geometries.
class NormSpec {
 public:
  struct L2 {};
  using Variant = std::variant<L2, EllipsoidWeightSpec, MultiscaleWeightSpec>;

  static NormSpec l2() { return NormSpec(L2{}); }
  static NormSpec ellipsoid(EllipsoidWeightSpec spec) {
    spec.require_valid();
    return NormSpec(std::move(spec));
  }
  static NormSpec multiscale(MultiscaleWeightSpec spec) {
    spec.require_valid();
    return NormSpec(std::move(spec));
  }

  bool is_l2() const { return std::holds_alternative<L2>(variant_); }
  bool is_ellipsoid() const { return std::holds_alternative<EllipsoidWeightSpec>(variant_); }
  bool is_multiscale() const { return std::holds_alternative<MultiscaleWeightSpec>(variant_); }
  const EllipsoidWeightSpec& ellipsoid_spec() const { return std::get<EllipsoidWeightSpec>(variant_); }
  const MultiscaleWeightSpec& multiscale_spec() const { return std::get<MultiscaleWeightSpec>(variant_); }
  const Variant& variant() const { return variant_; }

  std::string name() const {
    if (is_l2()) return "l2";
    return is_ellipsoid() ? "ellipsoid" : "multiscale";
  }

  /// Throws unless vectors of length K in layout `mode` can be measured.
  void check_compatible(std::size_t K, IndexMode mode) const {
    if (is_ellipsoid() && ellipsoid_spec().size() < K)
      throw std::invalid_argument("ellipsoid norm has " + std::to_string(ellipsoid_spec().size()) +
                                  " weights, signal has K = " + std::to_string(K));
    if (is_multiscale()) {
      if (!mode.is_multiscale())
        throw std::invalid_argument("multiscale norm needs a multiscale-indexed signal");
      if (mode.max_level != multiscale_spec().max_level())
        throw std::invalid_argument("multiscale norm has " + std::to_string(multiscale_spec().levels()) +
                                    " levels, signal has " + std::to_string(mode.max_level + 1));
    }
  }

  double operator()(std::span<const double> x) const {
    return std::visit(
        [&](const auto& spec) -> double {
          using T = std::decay_t<decltype(spec)>;
          if constexpr (std::is_same_v<T, L2>)
            return l2_norm(x);
          else if constexpr (std::is_same_v<T, EllipsoidWeightSpec>)
            return ellipsoid_norm(x, spec);
          else
            return multiscale_norm(x, spec);
        },
        variant_);
  }

 private:
  explicit NormSpec(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

/// Default NormSpec of the given family for K coefficients.
inline NormSpec default_norm(const std::string& family, std::size_t K) {
  if (family == "l2") return NormSpec::l2();
  if (family == "ellipsoid" || family == "default-ellipsoid")
    return NormSpec::ellipsoid(EllipsoidWeightSpec::default_spec(K));
  if (family == "multiscale" || family == "default-multiscale") {
    const auto J = multiscale_levels_for(K);
    if (!J) throw std::invalid_argument("multiscale norm needs K = 2^{J+1} - 1, got K = " + std::to_string(K));
    return NormSpec::multiscale(MultiscaleWeightSpec::default_spec(*J));
  }
  throw std::invalid_argument("unknown norm '" + family + "'");
}

/// ||a - b|| in the given norm.
inline double distance(std::span<const double> a, std::span<const double> b, const NormSpec& norm) {
  if (a.size() != b.size()) throw std::invalid_argument("distance: dimension mismatch");
  std::vector<double> diff(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) diff[k] = a[k] - b[k];
  return norm(diff);
}

inline double distance(const SignalVector& a, const SignalVector& b, const NormSpec& norm) {
  norm.check_compatible(a.size(), a.mode());
  return distance(a.coeffs(), b.coeffs(), norm);
}

inline void check_level(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1), got " + std::to_string(alpha));
}

/// 1-based rank ceil((1 - alpha) S) of the calibrated order statistic.
/// Products within 1e-9 of an integer are snapped to it.
inline std::size_t quantile_rank(double alpha, std::size_t S) {
  check_level(alpha);
  const double target = (1.0 - alpha) * static_cast<double>(S);
  const double nearest = std::round(target);
  const double rank = std::abs(target - nearest) <= 1e-9 * std::max(1.0, target) ? nearest : std::ceil(target);
  return std::clamp<std::size_t>(static_cast<std::size_t>(rank), 1, S);
}

/// Smallest r with at least ceil((1 - alpha) S) of the distances <= r.
inline double calibrate_radius(std::span<const double> distances, double alpha) {
  if (distances.empty()) throw std::invalid_argument("calibrate_radius: no draws");
  const std::size_t rank = quantile_rank(alpha, distances.size());
  std::vector<double> d(distances.begin(), distances.end());
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(rank - 1), d.end());
  return d[rank - 1];
}

inline std::vector<double> draw_distances(const DrawMatrix& draws, std::span<const double> center,
                                          const NormSpec& norm) {
  if (draws.cols() != center.size()) throw std::invalid_argument("draw_distances: dimension mismatch");
  std::vector<double> d(draws.rows());
  for (std::size_t s = 0; s < draws.rows(); ++s) d[s] = distance(draws.row(s), center, norm);
  return d;
}

inline double calibrate_radius(const DrawMatrix& draws, const SignalVector& center, const NormSpec& norm,
                               double alpha) {
  if (draws.rows() == 0) throw std::invalid_argument("calibrate_radius: no draws");
  check_level(alpha);
  norm.check_compatible(center.size(), center.mode());
  return calibrate_radius(draw_distances(draws, center.coeffs(), norm), alpha);
}

/// Distances ||draw_s - mean|| of S streamed posterior draws, one vector per
/// norm. Deterministic in (post, S, seed) for every thread count.
inline std::vector<std::vector<double>> posterior_distances(const PosteriorDistribution& post,
                                                            std::span<const NormSpec> norms, std::size_t S,
                                                            std::uint64_t seed, unsigned threads = 1) {
  for (const auto& norm : norms) norm.check_compatible(post.size(), post.mode);
  std::vector<std::vector<double>> out(norms.size(), std::vector<double>(S));
  for_each_posterior_deviation(post, S, seed, threads, [&](std::size_t s, std::span<const double> dev) {
    for (std::size_t j = 0; j < norms.size(); ++j) out[j][s] = norms[j](dev);
  });
  return out;
}

inline std::vector<double> posterior_distances(const PosteriorDistribution& post, const NormSpec& norm,
                                               std::size_t S, std::uint64_t seed, unsigned threads = 1) {
  return posterior_distances(post, std::span<const NormSpec>(&norm, 1), S, seed, threads).front();
}

/// {theta : ||theta - center|| <= blowup * radius}.
struct CredibleBall {
  SignalVector center;
  double radius = 0.0;
  NormSpec norm = NormSpec::l2();
  double blowup = 1.0;
  double alpha = 0.05;

  double effective_radius() const { return blowup * radius; }
};

inline CredibleBall make_credible_ball(SignalVector center, double radius, NormSpec norm, double alpha,
                                       double blowup = 1.0) {
  check_level(alpha);
  if (!(radius >= 0.0)) throw std::invalid_argument("credible ball: radius must be nonnegative");
  if (!(blowup >= 1.0)) throw std::invalid_argument("credible ball: blow-up factor must be >= 1");
  norm.check_compatible(center.size(), center.mode());
  return CredibleBall{std::move(center), radius, std::move(norm), blowup, alpha};
}

/// Posterior credible ball calibrated on S streamed draws.
inline CredibleBall calibrated_ball(const PosteriorDistribution& post, const NormSpec& norm, double alpha,
                                    std::size_t S, std::uint64_t seed, double blowup = 1.0, unsigned threads = 1) {
  const double r = calibrate_radius(posterior_distances(post, norm, S, seed, threads), alpha);
  return make_credible_ball(post.mean_signal(), r, norm, alpha, blowup);
}

/// Boundary inclusive.
inline bool contains(const CredibleBall& ball, const SignalVector& theta) {
  if (theta.size() != ball.center.size())
    throw std::invalid_argument("contains: signal has K = " + std::to_string(theta.size()) + ", ball has " +
                                std::to_string(ball.center.size()));
  return distance(theta, ball.center, ball.norm) <= ball.effective_radius();
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Pr(sum_{k<=K} g_k^2 / w_k <= M^2) for iid standard normal g, by Monte Carlo.
inline MonteCarloEstimate white_noise_ellipsoid_measure(const EllipsoidWeightSpec& spec, double M, std::size_t K,
                                                        std::size_t S, Engine& rng) {
  if (!(M >= 0.0)) throw std::invalid_argument("white_noise_ellipsoid_measure: M must be >= 0");
  if (S == 0) throw std::invalid_argument("white_noise_ellipsoid_measure: S must be positive");
  if (spec.size() < K) throw std::invalid_argument("white_noise_ellipsoid_measure: fewer weights than K");
  const auto w = spec.weights();
  const double M2 = M * M;
  StandardNormal normal;
  std::size_t inside = 0;
  for (std::size_t s = 0; s < S; ++s) {
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double g = normal(rng);
      sum += g * g / w[k];
    }
    if (sum <= M2) ++inside;
  }
  const double p = static_cast<double>(inside) / static_cast<double>(S);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(S))};
}

/// ||g|| for S white-noise vectors g_k ~ N(0, variance), streamed like
/// posterior_distances.
inline std::vector<double> white_noise_distances(const NormSpec& norm, std::size_t K, IndexMode mode, std::size_t S,
                                                 std::uint64_t seed, double variance = 1.0, unsigned threads = 1) {
  norm.check_compatible(K, mode);
  const std::vector<double> sd(K, std::sqrt(variance));
  std::vector<double> out(S);
  for_each_gaussian_deviation(sd, S, seed, threads,
                              [&](std::size_t s, std::span<const double> g) { out[s] = norm(g); });
  return out;
}

/// `points` equally spaced values spanning the pooled range of both samples.
inline std::vector<double> default_bvm_grid(std::span<const double> a, std::span<const double> b,
                                            std::size_t points = 200) {
  if (a.empty() || b.empty()) throw std::invalid_argument("default_bvm_grid: empty sample");
  if (points == 0) throw std::invalid_argument("default_bvm_grid: no grid points");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = lo;
    return grid;
  }
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  grid.back() = hi;
  return grid;
}

/// sup over the grid of |F_post(M) - F_ref(M)| for the empirical CDFs of two
/// distance samples. The posterior sample must already be scaled by sqrt(n).
inline double bvm_discrepancy(std::span<const double> scaled_posterior_distances,
                              std::span<const double> reference_distances, std::span<const double> grid) {
  if (scaled_posterior_distances.empty() || reference_distances.empty())
    throw std::invalid_argument("bvm_discrepancy: empty draw set");
  if (grid.empty()) throw std::invalid_argument("bvm_discrepancy: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("bvm_discrepancy: grid not sorted");
  std::vector<double> post(scaled_posterior_distances.begin(), scaled_posterior_distances.end());
  std::vector<double> ref(reference_distances.begin(), reference_distances.end());
  std::sort(post.begin(), post.end());
  std::sort(ref.begin(), ref.end());
  auto ecdf = [](const std::vector<double>& sorted, double m) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), m) - sorted.begin()) /
           static_cast<double>(sorted.size());
  };
  double sup = 0.0;
  for (double m : grid) sup = std::max(sup, std::abs(ecdf(post, m) - ecdf(ref, m)));
  return sup;
}

/// Matrix form: distances are sqrt(n) ||draw - center|| and ||reference draw||.
inline double bvm_discrepancy(const DrawMatrix& posterior_draws, const SignalVector& center, double n,
                              const NormSpec& norm, const DrawMatrix& reference_draws,
                              std::span<const double> grid) {
  check_noise_level(n);
  norm.check_compatible(center.size(), center.mode());
  auto scaled = draw_distances(posterior_draws, center.coeffs(), norm);
  for (auto& d : scaled) d *= std::sqrt(n);
  const std::vector<double> zero(reference_draws.cols(), 0.0);
  const auto ref = draw_distances(reference_draws, zero, norm);
  return bvm_discrepancy(scaled, ref, grid);
}

}  // namespace credsets
