#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "credsets/csv.hpp"
#include "credsets/sequence_model.hpp"

namespace credsets {

/// Weights w_1..w_K of the ellipsoid {theta : sum theta_k^2 / w_k <= M^2}.
///
/// `valid()` is a finite-range proxy for w_k / (k log^delta k) increasing to
/// infinity: it only checks that w_k / (k (ln(k+1))^delta) is nondecreasing
/// over 1..K. Specs built with `test_spec` skip the check.
class EllipsoidWeightSpec {
 public:
  static constexpr double kDefaultDelta = 1.5;

  EllipsoidWeightSpec(std::vector<double> weights, double delta) : weights_(std::move(weights)), delta_(delta) {
    if (weights_.empty()) throw std::invalid_argument("EllipsoidWeightSpec: no weights");
    for (double w : weights_)
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("EllipsoidWeightSpec: weights must be positive");
    if (!(delta_ > 1.0)) throw std::invalid_argument("EllipsoidWeightSpec: delta must exceed 1");
  }

  /// w_k = k (1 + ln k)^2, checked against delta = 1.5. Against delta = 2 the
  /// ratio tends to 1 from above, so any delta in (1, 2) certifies these weights.
  static EllipsoidWeightSpec default_spec(std::size_t K) {
    std::vector<double> w(K);
    for (std::size_t k = 1; k <= K; ++k) {
      const double lk = 1.0 + std::log(static_cast<double>(k));
      w[k - 1] = static_cast<double>(k) * lk * lk;
    }
    return EllipsoidWeightSpec(std::move(w), kDefaultDelta);
  }

  /// Arbitrary positive weights with the growth check disabled.
  static EllipsoidWeightSpec test_spec(std::vector<double> weights) {
    EllipsoidWeightSpec spec(std::move(weights), 2.0);
    spec.checked_ = false;
    return spec;
  }

  std::span<const double> weights() const { return weights_; }
  double delta() const { return delta_; }
  std::size_t size() const { return weights_.size(); }
  bool is_test_spec() const { return !checked_; }

  bool valid() const {
    double previous = 0.0;
    for (std::size_t k = 1; k <= weights_.size(); ++k) {
      const double kd = static_cast<double>(k);
      const double ratio = weights_[k - 1] / (kd * std::pow(std::log(kd + 1.0), delta_));
      if (ratio < previous) return false;
      previous = ratio;
    }
    return true;
  }

  /// Rejects an invalid spec unless it was built as a test spec.
  void require_valid() const {
    if (checked_ && !valid())
      throw std::invalid_argument("EllipsoidWeightSpec: w_k / (k ln(k+1)^delta) is not nondecreasing");
  }

 private:
  std::vector<double> weights_;
  double delta_ = 2.0;
  bool checked_ = true;
};

/// Level weights w_0..w_J of the multiscale ball sup_l max_k |theta_lk| / w_l <= M.
/// `valid()` checks that w_l / sqrt(l+1) is nondecreasing.
class MultiscaleWeightSpec {
 public:
  explicit MultiscaleWeightSpec(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw std::invalid_argument("MultiscaleWeightSpec: no weights");
    for (double w : weights_)
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("MultiscaleWeightSpec: weights must be positive");
  }

  /// w_l = sqrt(l+1) (1 + ln(l+1)) for l = 0..J.
  static MultiscaleWeightSpec default_spec(unsigned max_level) {
    std::vector<double> w(max_level + 1);
    for (unsigned l = 0; l <= max_level; ++l) {
      const double lp1 = static_cast<double>(l) + 1.0;
      w[l] = std::sqrt(lp1) * (1.0 + std::log(lp1));
    }
    return MultiscaleWeightSpec(std::move(w));
  }

  static MultiscaleWeightSpec test_spec(std::vector<double> weights) {
    MultiscaleWeightSpec spec(std::move(weights));
    spec.checked_ = false;
    return spec;
  }

  std::span<const double> weights() const { return weights_; }
  unsigned max_level() const { return static_cast<unsigned>(weights_.size() - 1); }
  std::size_t levels() const { return weights_.size(); }
  bool is_test_spec() const { return !checked_; }

  bool valid() const {
    double previous = 0.0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double ratio = weights_[l] / std::sqrt(static_cast<double>(l) + 1.0);
      if (ratio < previous) return false;
      previous = ratio;
    }
    return true;
  }

  void require_valid() const {
    if (checked_ && !valid())
      throw std::invalid_argument("MultiscaleWeightSpec: w_l / sqrt(l+1) is not nondecreasing");
  }

 private:
  std::vector<double> weights_;
  bool checked_ = true;
};

// Norms over raw coefficient spans. Index k in the formulas is 1-based.

inline double l2_norm_squared(std::span<const double> x) {
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return sum;
}

inline double l2_norm(std::span<const double> x) { return std::sqrt(l2_norm_squared(x)); }

inline double sobolev_norm_squared(std::span<const double> x, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("sobolev_norm: beta must be >= 0");
  double sum = 0.0;
  for (std::size_t k = 1; k <= x.size(); ++k) {
    const double v = x[k - 1];
    if (v == 0.0) continue;
    sum += v * v * std::pow(static_cast<double>(k), 2.0 * beta);
  }
  return sum;
}

/// sqrt(sum theta_k^2 k^{2 beta}).
inline double sobolev_norm(std::span<const double> x, double beta) {
  if (beta == 0.0) return l2_norm(x);
  return std::sqrt(sobolev_norm_squared(x, beta));
}

inline double ellipsoid_norm_squared(std::span<const double> x, const EllipsoidWeightSpec& spec) {
  if (spec.size() < x.size())
    throw std::invalid_argument("ellipsoid_norm: " + std::to_string(spec.size()) + " weights for " +
                                std::to_string(x.size()) + " coefficients");
  const auto w = spec.weights();
  double sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) sum += x[k] * x[k] / w[k];
  return sum;
}

inline double ellipsoid_norm(std::span<const double> x, const EllipsoidWeightSpec& spec) {
  return std::sqrt(ellipsoid_norm_squared(x, spec));
}

/// max over levels l of max_k |x_lk| / w_l, for x laid out as i = 2^l + k.
inline double multiscale_norm(std::span<const double> x, const MultiscaleWeightSpec& spec) {
  if (x.size() != multiscale_size(spec.max_level()))
    throw std::invalid_argument("multiscale_norm: " + std::to_string(spec.levels()) + " levels need K = " +
                                std::to_string(multiscale_size(spec.max_level())) + ", got " +
                                std::to_string(x.size()));
  const auto w = spec.weights();
  double result = 0.0;
  std::size_t begin = 0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    const std::size_t width = std::size_t{1} << l;
    double level_max = 0.0;
    for (std::size_t i = begin; i < begin + width; ++i) level_max = std::max(level_max, std::abs(x[i]));
    result = std::max(result, level_max / w[l]);
    begin += width;
  }
  return result;
}

// SignalVector overloads.

inline double l2_norm(const SignalVector& theta) { return l2_norm(theta.coeffs()); }
inline double sobolev_norm(const SignalVector& theta, double beta) { return sobolev_norm(theta.coeffs(), beta); }
inline double ellipsoid_norm(const SignalVector& theta, const EllipsoidWeightSpec& spec) {
  return ellipsoid_norm(theta.coeffs(), spec);
}

inline double multiscale_norm(const SignalVector& theta, const MultiscaleWeightSpec& spec) {
  if (!theta.mode().is_multiscale()) throw std::invalid_argument("multiscale_norm: signal is not in multiscale mode");
  if (theta.mode().max_level != spec.max_level())
    throw std::invalid_argument("multiscale_norm: signal has " + std::to_string(theta.mode().max_level + 1) +
                                " levels, weights have " + std::to_string(spec.levels()));
  return multiscale_norm(theta.coeffs(), spec);
}

// CSV: index,weight. Ellipsoid indices start at 1, multiscale levels at 0.

inline void write_weights_csv(std::ostream& out, const EllipsoidWeightSpec& spec) {
  out << "index,weight\n";
  const auto w = spec.weights();
  for (std::size_t k = 0; k < w.size(); ++k) out << k + 1 << ',' << csv::format(w[k]) << '\n';
}

inline void write_weights_csv(std::ostream& out, const MultiscaleWeightSpec& spec) {
  out << "index,weight\n";
  const auto w = spec.weights();
  for (std::size_t l = 0; l < w.size(); ++l) out << l << ',' << csv::format(w[l]) << '\n';
}

/// Reads weights ordered by the index column starting at `first_index`.
inline std::vector<double> weights_from_table(const csv::Table& table, long long first_index) {
  const auto ci = table.column("index");
  const auto cw = table.column("weight");
  std::vector<double> w(table.rows.size());
  std::vector<bool> seen(w.size(), false);
  for (const auto& row : table.rows) {
    const long long pos = csv::parse_int(row[ci]) - first_index;
    if (pos < 0 || static_cast<std::size_t>(pos) >= w.size() || seen[pos])
      throw std::invalid_argument("weights csv: bad or duplicate index " + row[ci]);
    seen[pos] = true;
    w[pos] = csv::parse_double(row[cw]);
  }
  return w;
}

}  // namespace credsets
