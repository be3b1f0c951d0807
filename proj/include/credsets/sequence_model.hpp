#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "credsets/csv.hpp"
#include "credsets/random.hpp"

namespace credsets {

/// Largest truncation level produced by default_truncation().
inline constexpr std::size_t kMaxTruncation = std::size_t{1} << 16;

/// Truncation used when none is configured: K = n rounded, capped at 2^16.
inline std::size_t default_truncation(double n) {
  if (!(n > 0.0)) throw std::invalid_argument("default_truncation: n must be positive");
  const double rounded = std::max(1.0, std::round(n));
  return rounded >= static_cast<double>(kMaxTruncation) ? kMaxTruncation
                                                        : static_cast<std::size_t>(rounded);
}

/// Level/position pair of a double-indexed (wavelet-style) coefficient.
struct LevelPosition {
  unsigned level = 0;
  std::size_t position = 0;
  friend bool operator==(const LevelPosition&, const LevelPosition&) = default;
};

/// Linear index i = 2^l + k of coefficient (l, k), 0 <= k < 2^l.
inline std::size_t multiscale_index(unsigned level, std::size_t position) {
  if (level >= 63) throw std::invalid_argument("multiscale_index: level too large");
  const std::size_t width = std::size_t{1} << level;
  if (position >= width)
    throw std::invalid_argument("multiscale_index: position " + std::to_string(position) +
                                " out of range for level " + std::to_string(level));
  return width + position;
}

inline LevelPosition multiscale_unindex(std::size_t index) {
  if (index == 0) throw std::invalid_argument("multiscale_unindex: indices start at 1");
  unsigned level = 0;
  while ((index >> (level + 1)) != 0) ++level;
  return {level, index - (std::size_t{1} << level)};
}

/// Number of coefficients in a multiscale layout with levels 0..J.
inline std::size_t multiscale_size(unsigned max_level) {
  if (max_level >= 62) throw std::invalid_argument("multiscale_size: level too large");
  return (std::size_t{1} << (max_level + 1)) - 1;
}

/// Inverse of multiscale_size; nullopt when K is not of the form 2^{J+1} - 1.
inline std::optional<unsigned> multiscale_levels_for(std::size_t K) {
  for (unsigned J = 0; J < 62; ++J) {
    const std::size_t size = multiscale_size(J);
    if (size == K) return J;
    if (size > K) break;
  }
  return std::nullopt;
}

/// How coefficients are addressed. Multiscale layouts cover levels 0..max_level.
struct IndexMode {
  enum class Kind { Single, Multiscale };
  Kind kind = Kind::Single;
  unsigned max_level = 0;

  static IndexMode single() { return {}; }
  static IndexMode multiscale(unsigned J) { return {Kind::Multiscale, J}; }
  bool is_multiscale() const { return kind == Kind::Multiscale; }
  friend bool operator==(const IndexMode&, const IndexMode&) = default;
};

/// Finite truncation theta_1..theta_K of an l2 sequence. Immutable.
class SignalVector {
 public:
  SignalVector() = default;

  explicit SignalVector(std::vector<double> coeffs, IndexMode mode = IndexMode::single())
      : coeffs_(std::move(coeffs)), mode_(mode) {
    if (coeffs_.empty()) throw std::invalid_argument("SignalVector: K must be positive");
    for (double c : coeffs_)
      if (!std::isfinite(c)) throw std::invalid_argument("SignalVector: non-finite coefficient");
    if (mode_.is_multiscale() && coeffs_.size() != multiscale_size(mode_.max_level))
      throw std::invalid_argument("SignalVector: multiscale layout with J = " +
                                  std::to_string(mode_.max_level) + " needs K = " +
                                  std::to_string(multiscale_size(mode_.max_level)) + ", got " +
                                  std::to_string(coeffs_.size()));
  }

  static SignalVector zeros(std::size_t K, IndexMode mode = IndexMode::single()) {
    return SignalVector(std::vector<double>(K, 0.0), mode);
  }

  std::size_t size() const { return coeffs_.size(); }
  IndexMode mode() const { return mode_; }
  std::span<const double> coeffs() const { return coeffs_; }

  /// 1-based access, matching theta_k.
  double at(std::size_t k) const {
    if (k == 0 || k > coeffs_.size()) throw std::out_of_range("SignalVector::at");
    return coeffs_[k - 1];
  }
  double at(unsigned level, std::size_t position) const {
    if (!mode_.is_multiscale() || level > mode_.max_level)
      throw std::out_of_range("SignalVector::at(level, position)");
    return coeffs_[multiscale_index(level, position) - 1];
  }

  /// Same coefficients reinterpreted in a different layout.
  SignalVector with_mode(IndexMode mode) const { return SignalVector(coeffs_, mode); }

  friend bool operator==(const SignalVector&, const SignalVector&) = default;

 private:
  std::vector<double> coeffs_;
  IndexMode mode_{};
};

/// Y_k = theta_k + g_k / sqrt(n).
struct Observation {
  std::vector<double> y;
  double n = 1.0;
  std::uint64_t seed_tag = 0;
  IndexMode mode{};

  std::size_t size() const { return y.size(); }
};

inline void check_noise_level(double n) {
  if (!(n > 0.0) || !std::isfinite(n))
    throw std::invalid_argument("observation: n must be positive and finite, got " + std::to_string(n));
}

/// Observation from an injected standard-normal sequence g.
inline Observation generate_observation(const SignalVector& truth, double n, std::span<const double> noise,
                                        std::uint64_t seed_tag = 0) {
  check_noise_level(n);
  if (noise.size() != truth.size())
    throw std::invalid_argument("generate_observation: noise length " + std::to_string(noise.size()) +
                                " does not match K = " + std::to_string(truth.size()));
  const double scale = 1.0 / std::sqrt(n);
  Observation obs{std::vector<double>(truth.size()), n, seed_tag, truth.mode()};
  const auto theta = truth.coeffs();
  for (std::size_t k = 0; k < theta.size(); ++k) obs.y[k] = theta[k] + noise[k] * scale;
  return obs;
}

/// Observation with noise drawn from `rng`, K standard normals in index order.
inline Observation generate_observation(const SignalVector& truth, double n, Engine& rng,
                                        std::uint64_t seed_tag = 0) {
  check_noise_level(n);
  StandardNormal normal;
  std::vector<double> g(truth.size());
  for (auto& x : g) x = normal(rng);
  return generate_observation(truth, n, g, seed_tag);
}

/// theta_k = c k^{-1/2-beta}: exactly beta-regular decay.
inline SignalVector polynomial_signal(double beta, double amplitude, std::size_t K) {
  if (!(beta > 0.0)) throw std::invalid_argument("polynomial_signal: beta must be positive");
  if (K == 0) throw std::invalid_argument("polynomial_signal: K must be positive");
  std::vector<double> theta(K);
  for (std::size_t k = 1; k <= K; ++k)
    theta[k - 1] = amplitude * std::pow(static_cast<double>(k), -0.5 - beta);
  return SignalVector(std::move(theta));
}

/// theta_k = q^{-j} at k = q^{2j}, zero elsewhere. Long empty gaps make it
/// violate polished-tail conditions.
inline SignalVector lacunary_signal(std::size_t q, std::size_t K) {
  if (q < 2) throw std::invalid_argument("lacunary_signal: gap base must be >= 2");
  if (K == 0) throw std::invalid_argument("lacunary_signal: K must be positive");
  std::vector<double> theta(K, 0.0);
  double amplitude = 1.0;
  for (std::size_t k = 1; k <= K; k *= q * q) {
    theta[k - 1] = amplitude;
    amplitude /= static_cast<double>(q);
    if (k > K / (q * q)) break;
  }
  return SignalVector(std::move(theta));
}

// CSV: index,level,position,value. level/position are empty in single mode.

inline void write_signal_csv(std::ostream& out, const SignalVector& signal) {
  out << "index,level,position,value\n";
  const auto theta = signal.coeffs();
  for (std::size_t i = 1; i <= theta.size(); ++i) {
    out << i << ',';
    if (signal.mode().is_multiscale()) {
      const auto lp = multiscale_unindex(i);
      out << lp.level << ',' << lp.position;
    } else {
      out << ',';
    }
    out << ',' << csv::format(theta[i - 1]) << '\n';
  }
}

inline SignalVector signal_from_table(const csv::Table& table) {
  const auto ci = table.column("index");
  const auto cl = table.column("level");
  const auto cp = table.column("position");
  const auto cv = table.column("value");
  const std::size_t K = table.rows.size();
  if (K == 0) throw std::invalid_argument("signal csv: no coefficients");

  std::vector<double> theta(K);
  std::vector<bool> seen(K, false);
  bool any_level = false, any_blank = false;
  unsigned max_level = 0;
  for (const auto& row : table.rows) {
    const auto index = csv::parse_int(row[ci]);
    if (index < 1 || static_cast<std::size_t>(index) > K)
      throw std::invalid_argument("signal csv: index " + row[ci] + " outside 1.." + std::to_string(K));
    if (seen[index - 1]) throw std::invalid_argument("signal csv: duplicate index " + row[ci]);
    seen[index - 1] = true;
    theta[index - 1] = csv::parse_double(row[cv]);
    if (row[cl].empty() && row[cp].empty()) {
      any_blank = true;
      continue;
    }
    any_level = true;
    const auto level = csv::parse_int(row[cl]);
    const auto position = csv::parse_int(row[cp]);
    if (level < 0 || position < 0 ||
        multiscale_index(static_cast<unsigned>(level), static_cast<std::size_t>(position)) !=
            static_cast<std::size_t>(index))
      throw std::invalid_argument("signal csv: (level, position) inconsistent with index " + row[ci]);
    max_level = std::max(max_level, static_cast<unsigned>(level));
  }
  if (any_level && any_blank)
    throw std::invalid_argument("signal csv: mixes single and multiscale rows");
  return SignalVector(std::move(theta), any_level ? IndexMode::multiscale(max_level) : IndexMode::single());
}

inline SignalVector read_signal_csv(const std::string& path) { return signal_from_table(csv::read_file(path)); }

}  // namespace credsets
