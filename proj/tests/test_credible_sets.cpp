#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "credsets/credible_sets.hpp"
#include "credsets/serialization.hpp"

using namespace credsets;

namespace {

PosteriorDistribution flat_posterior(std::size_t K, double variance, IndexMode mode = {}) {
  return PosteriorDistribution{std::vector<double>(K, 0.0), std::vector<double>(K, variance), 1.0, mode};
}

}  // namespace

// Analytic l2 oracle: with equal posterior variances v, ||draw - mean||^2 / v
// is chi-square with K degrees of freedom.
TEST(CalibrateRadius, MatchesChiSquareQuantileInL2) {
  for (std::size_t K : {1u, 5u, 40u}) {
    const double v = 0.3;
    const auto post = flat_posterior(K, v);
    const auto d = posterior_distances(post, NormSpec::l2(), 100000, 4242 + K);
    const double r = calibrate_radius(d, 0.05);
    const boost::math::chi_squared chi(static_cast<double>(K));
    const double exact = std::sqrt(v * boost::math::quantile(chi, 0.95));
    EXPECT_NEAR(r / exact, 1.0, 0.02) << "K = " << K;
  }
}

TEST(CalibrateRadius, StandardNormalQuantile) {
  const auto d = posterior_distances(flat_posterior(1, 1.0), NormSpec::l2(), 100000, 1);
  EXPECT_NEAR(calibrate_radius(d, 0.05), 1.959964, 0.02 * 1.959964);
}

TEST(CalibrateRadius, Examples) {
  const std::vector<double> twos(17, 2.0);
  for (double alpha : {0.01, 0.3, 0.9}) EXPECT_EQ(calibrate_radius(twos, alpha), 2.0);
  const std::vector<double> d{3.0, 1.0, 4.0, 2.0};
  EXPECT_EQ(calibrate_radius(d, 0.05), 4.0);
  EXPECT_EQ(quantile_rank(0.05, 4), 4u);
  // 0.9 * 10 is 9.000000000000002 in floating point.
  EXPECT_EQ(quantile_rank(0.1, 10), 9u);
  EXPECT_EQ(quantile_rank(0.05, 100000), 95000u);
  EXPECT_EQ(quantile_rank(0.999, 10), 1u);
}

TEST(CalibrateRadius, Errors) {
  EXPECT_THROW(calibrate_radius(std::vector<double>{}, 0.05), std::invalid_argument);
  EXPECT_THROW(calibrate_radius(std::vector<double>{1.0}, 0.0), std::invalid_argument);
  EXPECT_THROW(calibrate_radius(std::vector<double>{1.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(calibrate_radius(DrawMatrix(0, 3), SignalVector::zeros(3), NormSpec::l2(), 0.05),
               std::invalid_argument);
}

TEST(CalibrateRadius, MatrixFormAgreesWithDistances) {
  const auto post = flat_posterior(8, 2.0);
  Engine rng = make_engine(8);
  const auto draws = sample_posterior(post, 999, rng);
  const auto norm = NormSpec::ellipsoid(EllipsoidWeightSpec::default_spec(8));
  const double r = calibrate_radius(draws, post.mean_signal(), norm, 0.2);
  auto d = draw_distances(draws, post.means, norm);
  std::sort(d.begin(), d.end());
  EXPECT_EQ(r, d[quantile_rank(0.2, 999) - 1]);
  EXPECT_EQ(std::count_if(d.begin(), d.end(), [&](double x) { return x <= r; }), 800);
}

TEST(CalibrateRadius, NonincreasingInAlphaAndScaleEquivariant) {
  std::mt19937_64 rng(21);
  std::exponential_distribution<double> e;
  std::vector<double> d(1013);
  for (auto& x : d) x = e(rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha = 0.01; alpha < 1.0; alpha += 0.01) {
    const double r = calibrate_radius(d, alpha);
    EXPECT_LE(r, prev);
    prev = r;
    for (double c : {0.5, 3.0, 1024.0}) {
      std::vector<double> scaled(d);
      for (auto& x : scaled) x *= c;
      EXPECT_EQ(calibrate_radius(scaled, alpha), c * r);
    }
  }
}

TEST(Contains, Examples) {
  const SignalVector center({0.0, 0.0});
  const auto ball = make_credible_ball(center, 0.0, NormSpec::l2(), 0.05);
  EXPECT_TRUE(contains(ball, center));

  const SignalVector at15({1.5, 0.0});
  EXPECT_TRUE(contains(make_credible_ball(center, 1.0, NormSpec::l2(), 0.05, 2.0), at15));
  EXPECT_FALSE(contains(make_credible_ball(center, 1.0, NormSpec::l2(), 0.05, 1.0), at15));

  const SignalVector at5({3.0, 4.0});
  EXPECT_TRUE(contains(make_credible_ball(center, 2.5, NormSpec::l2(), 0.05, 2.0), at5));
  EXPECT_TRUE(contains(make_credible_ball(center, 5.0, NormSpec::l2(), 0.05), at5));
}

TEST(Contains, Errors) {
  const auto ball = make_credible_ball(SignalVector::zeros(3), 1.0, NormSpec::l2(), 0.05);
  EXPECT_THROW(contains(ball, SignalVector::zeros(2)), std::invalid_argument);
  EXPECT_THROW(make_credible_ball(SignalVector::zeros(3), 1.0, NormSpec::l2(), 0.05, 0.5), std::invalid_argument);
  EXPECT_THROW(make_credible_ball(SignalVector::zeros(3), -1.0, NormSpec::l2(), 0.05), std::invalid_argument);
  EXPECT_THROW(make_credible_ball(SignalVector::zeros(3), 1.0, NormSpec::multiscale(MultiscaleWeightSpec::default_spec(1)), 0.05),
               std::invalid_argument);
}

TEST(Contains, MonotoneInBlowup) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  const auto norm = NormSpec::ellipsoid(EllipsoidWeightSpec::default_spec(10));
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(10);
    for (auto& x : v) x = z(rng);
    const SignalVector theta(v);
    bool prev = false;
    for (double L : {1.0, 1.5, 2.0, 4.0, 100.0}) {
      const bool in = contains(make_credible_ball(SignalVector::zeros(10), 0.6, norm, 0.05, L), theta);
      EXPECT_TRUE(!prev || in);
      prev = in;
    }
  }
}

TEST(CalibratedBall, FreshDrawsInsideAtNominalRate) {
  const unsigned J = 6;
  const std::size_t K = multiscale_size(J);
  std::vector<double> vars(K);
  for (std::size_t k = 1; k <= K; ++k) vars[k - 1] = 1.0 / (1.0 + std::pow(static_cast<double>(k), 2.0));
  const PosteriorDistribution post{std::vector<double>(K, 0.1), vars, 1.0, IndexMode::multiscale(J)};
  const std::vector<NormSpec> norms{NormSpec::l2(), NormSpec::ellipsoid(EllipsoidWeightSpec::default_spec(K)),
                                    NormSpec::multiscale(MultiscaleWeightSpec::default_spec(J))};
  const std::size_t S = 20000;
  const auto cal = posterior_distances(post, norms, S, 1);
  const auto fresh = posterior_distances(post, norms, S, 2);
  for (std::size_t j = 0; j < norms.size(); ++j) {
    const double r = calibrate_radius(cal[j], 0.1);
    const double inside =
        static_cast<double>(std::count_if(fresh[j].begin(), fresh[j].end(), [&](double d) { return d <= r; })) / S;
    EXPECT_NEAR(inside, 0.9, 0.015) << norms[j].name();
  }
}

TEST(CalibratedBall, CenterIsPosteriorMean) {
  const PosteriorDistribution post{{1.0, 2.0, 3.0}, {0.1, 0.1, 0.1}, 1.0, {}};
  const auto ball = calibrated_ball(post, NormSpec::l2(), 0.05, 500, 9, 1.5);
  EXPECT_EQ(ball.center.coeffs()[1], 2.0);
  EXPECT_EQ(ball.effective_radius(), 1.5 * ball.radius);
  EXPECT_TRUE(contains(ball, post.mean_signal()));
}

TEST(WhiteNoiseEllipsoidMeasure, Examples) {
  const auto spec = EllipsoidWeightSpec::default_spec(1000);
  Engine rng = make_engine(1);
  EXPECT_EQ(white_noise_ellipsoid_measure(spec, 0.0, 100, 1000, rng).estimate, 0.0);
  EXPECT_EQ(white_noise_ellipsoid_measure(spec, 1e6, 100, 1000, rng).estimate, 1.0);
  EXPECT_THROW(white_noise_ellipsoid_measure(spec, -1.0, 100, 10, rng), std::invalid_argument);
  EXPECT_THROW(white_noise_ellipsoid_measure(spec, 1.0, 100, 0, rng), std::invalid_argument);
}

TEST(WhiteNoiseEllipsoidMeasure, ReproducibleAcrossSeeds) {
  const auto spec = EllipsoidWeightSpec::default_spec(1000);
  Engine a = make_engine(101), b = make_engine(202);
  const auto ea = white_noise_ellipsoid_measure(spec, 1.0, 1000, 20000, a);
  const auto eb = white_noise_ellipsoid_measure(spec, 1.0, 1000, 20000, b);
  EXPECT_GT(ea.estimate, 0.0);
  EXPECT_LT(ea.estimate, 1.0);
  EXPECT_LT(std::abs(ea.estimate - eb.estimate), 3.0 * std::hypot(ea.std_error, eb.std_error));
}

TEST(BvmDiscrepancy, Examples) {
  const std::vector<double> a{0.5, 1.0, 1.5, 2.0};
  EXPECT_EQ(bvm_discrepancy(a, a, default_bvm_grid(a, a)), 0.0);
  const std::vector<double> low{0.1, 0.2}, high{10.0, 11.0}, grid{1.0, 2.0, 5.0};
  EXPECT_EQ(bvm_discrepancy(low, high, grid), 1.0);
}

TEST(BvmDiscrepancy, Errors) {
  const std::vector<double> a{1.0}, empty;
  EXPECT_THROW(bvm_discrepancy(a, a, empty), std::invalid_argument);
  EXPECT_THROW(bvm_discrepancy(empty, a, a), std::invalid_argument);
  EXPECT_THROW(bvm_discrepancy(a, a, std::vector<double>{2.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(default_bvm_grid(a, a, 0), std::invalid_argument);
}

TEST(BvmDiscrepancy, InvariantUnderReordering) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  std::vector<double> a(500), b(500);
  for (auto& x : a) x = std::abs(z(rng));
  for (auto& x : b) x = std::abs(1.2 * z(rng));
  const auto grid = default_bvm_grid(a, b);
  EXPECT_EQ(grid.size(), 200u);
  const double d = bvm_discrepancy(a, b, grid);
  std::shuffle(a.begin(), a.end(), rng);
  std::shuffle(b.begin(), b.end(), rng);
  EXPECT_EQ(bvm_discrepancy(a, b, grid), d);
}

TEST(BvmDiscrepancy, MatrixFormScalesBySqrtN) {
  // Posterior draws with variance 1/n scale back to white noise.
  const double n = 400.0;
  const auto post = flat_posterior(20, 1.0 / n);
  Engine rng = make_engine(12);
  const auto draws = sample_posterior(post, 4000, rng);
  const auto ref = sample_posterior(flat_posterior(20, 1.0), 4000, rng);
  const auto norm = NormSpec::ellipsoid(EllipsoidWeightSpec::default_spec(20));
  std::vector<double> grid(100);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.02 * static_cast<double>(i);
  EXPECT_LT(bvm_discrepancy(draws, post.mean_signal(), n, norm, ref, grid), 0.05);
  EXPECT_GT(bvm_discrepancy(draws, post.mean_signal(), 4.0 * n, norm, ref, grid), 0.3);
}

TEST(WhiteNoiseDistances, ThreadCountIndependent) {
  const auto norm = NormSpec::multiscale(MultiscaleWeightSpec::default_spec(4));
  const auto one = white_noise_distances(norm, 31, IndexMode::multiscale(4), 3000, 5, 1.0, 1);
  const auto three = white_noise_distances(norm, 31, IndexMode::multiscale(4), 3000, 5, 1.0, 3);
  EXPECT_EQ(one, three);
}

TEST(NormSpec, DefaultsAndCompatibility) {
  EXPECT_TRUE(default_norm("l2", 5).is_l2());
  EXPECT_TRUE(default_norm("ellipsoid", 5).is_ellipsoid());
  EXPECT_TRUE(default_norm("multiscale", 15).is_multiscale());
  EXPECT_THROW(default_norm("multiscale", 14), std::invalid_argument);
  EXPECT_THROW(default_norm("sup", 5), std::invalid_argument);
  EXPECT_THROW(NormSpec::ellipsoid(EllipsoidWeightSpec({1.0, 1.0}, 2.0)), std::invalid_argument);
  EXPECT_THROW(default_norm("ellipsoid", 5).check_compatible(6, {}), std::invalid_argument);
}

TEST(Serialization, BallJson) {
  const auto ball = make_credible_ball(SignalVector::zeros(4), 0.75, default_norm("ellipsoid", 4), 0.05, 2.0);
  const auto j = to_json(ball, "posterior_mean.csv");
  EXPECT_EQ(j["alpha"], 0.05);
  EXPECT_EQ(j["radius"], 0.75);
  EXPECT_EQ(j["blowup"], 2.0);
  EXPECT_EQ(j["center_ref"], "posterior_mean.csv");
  const auto back = norm_from_json(j["norm"], 4);
  ASSERT_TRUE(back.is_ellipsoid());
  EXPECT_TRUE(std::ranges::equal(back.ellipsoid_spec().weights(), ball.norm.ellipsoid_spec().weights()));
}

TEST(Serialization, NormJsonRoundTrip) {
  for (const auto& norm : {NormSpec::l2(), default_norm("ellipsoid", 9), default_norm("multiscale", 15)}) {
    const auto back = norm_from_json(to_json(norm), 15);
    EXPECT_EQ(back.name(), norm.name());
    EXPECT_EQ(to_json(back), to_json(norm));
  }
}
