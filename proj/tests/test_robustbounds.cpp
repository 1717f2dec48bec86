#include <doctest.h>

#include <algorithm>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "mtsafe/robustbounds.hpp"

using namespace mtsafe;

namespace {

Hyperparams hp1(double sf2, double ls, double sn2) {
  Hyperparams hp;
  hp.signal_variance = sf2;
  hp.lengthscales = Eigen::VectorXd::Constant(1, ls);
  hp.noise_variance = sn2;
  return hp;
}

std::vector<CorrelationMatrix> cloud(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.2, 0.8);
  std::vector<CorrelationMatrix> out;
  for (int i = 0; i < n; ++i) out.push_back(CorrelationMatrix::uniform(2, U(rng)));
  return out;
}

}  // namespace

TEST_CASE("confidence set membership") {
  const CorrelationMatrix lo = CorrelationMatrix::identity(2), hi = CorrelationMatrix::uniform(2, 0.5);
  CHECK(in_confidence_set(lo, lo, hi));
  CHECK(in_confidence_set(hi, lo, hi));
  CHECK_FALSE(in_confidence_set(CorrelationMatrix::uniform(2, 0.6), lo, hi));
  CHECK(in_confidence_set(lo, lo, lo));
}

TEST_CASE("find_bounds on degenerate sets") {
  const std::vector<CorrelationMatrix> one{CorrelationMatrix::uniform(2, 0.3)};
  const BoundingPair b = find_bounds(one, 0.1, 1);
  CHECK(b.sigma_lo == one[0]);
  CHECK(b.sigma_hi == one[0]);
  CHECK(b.gamma_sq == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(find_bounds(one, 0.1), std::invalid_argument);  // default minimum of 20 samples

  const std::vector<CorrelationMatrix> same(25, CorrelationMatrix::uniform(3, 0.4));
  for (double delta : {0.05, 0.5}) CHECK(find_bounds(same, delta).gamma_sq == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(find_bounds(same, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(find_bounds(same, 1.0), std::invalid_argument);
}

TEST_CASE("find_bounds against an exhaustive quantile search") {
  const auto s = cloud(300, 9);
  const double delta = 0.1;
  const BoundingPair b = find_bounds(s, delta);
  const std::size_t rank = static_cast<std::size_t>(std::ceil((1 - delta) * s.size()));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& lo : s) {
    std::vector<double> h;
    for (const auto& x : s) h.push_back(max_gen_eig(lo, x));
    std::sort(h.begin(), h.end());
    best = std::min(best, h[rank - 1]);
  }
  CHECK(b.gamma_sq == doctest::Approx(best).epsilon(1e-12));
  CHECK(b.gamma_sq >= max_gen_eig(b.sigma_lo, b.sigma_hi) - 1e-10);
  std::size_t members = 0;
  for (const auto& x : s) members += in_confidence_set(x, b.sigma_lo, b.sigma_hi);
  CHECK(members >= rank);
  CHECK(b.member_fraction == doctest::Approx(members / 300.0));
  CHECK(b.member_fraction >= 0.9);
}

TEST_CASE("lambda_sq_over_set") {
  const CorrelationMatrix lo = CorrelationMatrix::identity(2), hi = CorrelationMatrix::uniform(2, 0.5);
  const std::vector<CorrelationMatrix> just_lo{lo};
  CHECK(lambda_sq_over_set(just_lo, lo, lo) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<CorrelationMatrix> pair{lo, hi};
  CHECK(lambda_sq_over_set(pair, lo, hi) == doctest::Approx(2.0).epsilon(1e-12));
  std::vector<CorrelationMatrix> more = pair;
  more.push_back(CorrelationMatrix::uniform(2, 0.2));
  CHECK(lambda_sq_over_set(more, lo, hi) >= lambda_sq_over_set(pair, lo, hi));
  const std::vector<CorrelationMatrix> outside{CorrelationMatrix::uniform(2, 0.9)};
  CHECK_THROWS_AS(lambda_sq_over_set(outside, lo, hi), std::invalid_argument);
}

TEST_CASE("beta_bar closed forms and monotonicity") {
  CHECK(beta_bar(1.0, 0.0, 3.0, 0.1, 4.0) == doctest::Approx(4.0));
  CHECK(beta_bar(2.25, 0.0, 3.0, 0.1, 4.0) == doctest::Approx(9.0));
  CHECK(beta_bar(1.0, 1.0, 1.0, 1.0, 4.0) == doctest::Approx(16.0));
  CHECK_THROWS_AS(beta_bar(1.0, 1.0, 1.0, 0.0, 4.0), std::invalid_argument);
  const double base = beta_bar(1.5, 1.2, 2.0, 0.5, 4.0);
  CHECK(beta_bar(1.6, 1.2, 2.0, 0.5, 4.0) >= base);
  CHECK(beta_bar(1.5, 1.3, 2.0, 0.5, 4.0) >= base);
  CHECK(beta_bar(1.5, 1.2, 2.1, 0.5, 4.0) >= base);
  CHECK(beta_bar(1.5, 1.2, 2.0, 0.5, 4.1) >= base);
  CHECK(beta_bar(1.5, 1.2, 2.0, 0.6, 4.0) <= base);
}

TEST_CASE("finite_grid_beta is the squared two-sided union-bound quantile") {
  const boost::math::normal_distribution<double> n01;
  for (std::size_t n : {1u, 100u, 5000u}) {
    const double z = boost::math::quantile(boost::math::complement(n01, 0.05 / (2.0 * n)));
    CHECK(finite_grid_beta(n, 0.05) == doctest::Approx(z * z).epsilon(1e-12));
  }
  // Every point covered with probability 1 - rho/n: check the tail mass directly.
  const double b = finite_grid_beta(100, 0.05);
  CHECK(2.0 * boost::math::cdf(boost::math::complement(n01, std::sqrt(b))) * 100 == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("compute_robust_bounds invariants") {
  const auto s = cloud(120, 3);
  SampleSet set;
  set.samples = s;
  BoundsConfig cfg;
  const RobustBounds zero = compute_robust_bounds(set, cfg, 2.0, 0.1);
  CHECK(zero.lambda_sq == 0.0);
  CHECK(zero.beta_bar == doctest::Approx(zero.gamma_sq * cfg.beta));
  CHECK(zero.member_fraction >= 1 - cfg.delta);
  cfg.lambda_mode = LambdaMode::Theorem;
  const RobustBounds thm = compute_robust_bounds(set, cfg, 2.0, 0.1);
  CHECK(thm.lambda_sq >= 1.0);
  CHECK(thm.beta_bar == doctest::Approx(beta_bar(thm.gamma_sq, thm.lambda_sq, 2.0, 0.1, cfg.beta)));

  const RobustBounds exact = exact_bounds(CorrelationMatrix::uniform(2, 0.4), BoundsConfig{}, 1.0, 0.1);
  CHECK(exact.gamma_sq == 1.0);
  CHECK(exact.beta_bar == doctest::Approx(4.0));
}

TEST_CASE("variance domination reports") {
  MultiTaskDataset d(2, Box::unit(1));
  d = add_observation(d, Eigen::VectorXd::Constant(1, 0.1), 0, 0.3);
  d = add_observation(d, Eigen::VectorXd::Constant(1, 0.5), 1, -0.2);
  d = add_observation(d, Eigen::VectorXd::Constant(1, 0.9), 1, 0.4);
  const Hyperparams hp = hp1(1.0, 0.3, 0.01);
  TaggedPoints g;
  g.points = Eigen::VectorXd::LinSpaced(20, 0.0, 1.0);
  for (int i = 0; i < 20; ++i) g.tasks.push_back(static_cast<std::size_t>(i % 2));

  RobustBounds b = exact_bounds(CorrelationMatrix::uniform(2, 0.3), BoundsConfig{}, 1.0, 0.1);
  const VarianceDominationReport self = verify_variance_domination(d, hp, b, b.sigma_lo, g);
  CHECK(self.psd_ok);
  CHECK(self.pointwise_ok);

  b.sigma_hi = CorrelationMatrix::uniform(2, 0.6);
  b.gamma_sq = max_gen_eig(b.sigma_lo, b.sigma_hi);
  const VarianceDominationReport in = verify_variance_domination(d, hp, b, CorrelationMatrix::uniform(2, 0.5), g);
  CHECK(in.probe_in_set);
  CHECK(in.psd_ok);
  CHECK(in.pointwise_ok);

  b.gamma_sq = 1.0;  // understate gamma: the probe now exceeds it
  const VarianceDominationReport out = verify_variance_domination(d, hp, b, CorrelationMatrix::uniform(2, 0.9), g);
  CHECK_FALSE(out.probe_in_set);
  CHECK_FALSE(out.psd_ok);
}

TEST_CASE("RKHS norm formulas") {
  const Hyperparams hp = hp1(1.0, 0.3, 0.0);
  Eigen::MatrixXd X(4, 1), W(4, 1);
  X << 0.1, 0.3, 0.6, 0.8;
  W << 0.5, -1.0, 0.3, 2.0;
  const CorrelationMatrix one = CorrelationMatrix::identity(1);
  const Eigen::MatrixXd K = gram(X, X, hp);
  CHECK(rkhs_norm_sq_hadamard(W, X, one, hp) == doctest::Approx(W.col(0).dot(K * W.col(0))).epsilon(1e-12));

  Eigen::MatrixXd W2(4, 2);
  W2 << 0.5, 1.0, -1.0, 0.2, 0.3, -0.7, 2.0, 0.1;
  const CorrelationMatrix a = CorrelationMatrix::uniform(2, 0.3), b = CorrelationMatrix::uniform(2, 0.7);
  const RkhsNormReport same = verify_rkhs_norm_bound(W2, X, a, a, hp);
  CHECK(same.lambda_sq == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(same.norm_sq_a == doctest::Approx(same.norm_sq_b).epsilon(1e-12));
  const RkhsNormReport r = verify_rkhs_norm_bound(W2, X, a, b, hp);
  CHECK(r.bound_holds);
  CHECK(r.formula_gap < 1e-9);
  CHECK(r.norm_sq_a == doctest::Approx(rkhs_norm_sq_kronecker(W2, X, a, hp)).epsilon(1e-9));
}
