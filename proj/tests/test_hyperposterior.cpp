#include <doctest.h>

#include <random>

#include "mtsafe/hyperposterior.hpp"

using namespace mtsafe;

namespace {

Hyperparams hp1(double sf2, double ls, double sn2) {
  Hyperparams hp;
  hp.signal_variance = sf2;
  hp.lengthscales = Eigen::VectorXd::Constant(1, ls);
  hp.noise_variance = sn2;
  return hp;
}

bool valid_nonnegative(const CorrelationMatrix& c) {
  const Eigen::MatrixXd& m = c.matrix();
  if ((m.diagonal().array() != 1.0).any()) return false;
  if ((m - m.transpose()).norm() != 0.0) return false;
  if ((m.array() < 0.0).any()) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.rows(); ++j)
      if (i != j && !(m(i, j) < 1.0)) return false;
  return Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success;
}

Eigen::VectorXd offdiag(const CorrelationMatrix& c) {
  const Eigen::Index u = c.size();
  Eigen::VectorXd out(unconstrained_size(u));
  for (Eigen::Index i = 1, k = 0; i < u; ++i)
    for (Eigen::Index j = 0; j < i; ++j) out(k++) = c(i, j);
  return out;
}

}  // namespace

TEST_CASE("LKJ log density") {
  const LkjPrior flat{1.0, 3};
  CHECK(lkj_log_density(CorrelationMatrix::identity(3), flat) ==
        lkj_log_density(CorrelationMatrix::uniform(3, 0.6), flat));
  const LkjPrior two{2.0, 2};
  const double diff =
      lkj_log_density(CorrelationMatrix::identity(2), two) - lkj_log_density(CorrelationMatrix::uniform(2, 0.5), two);
  CHECK(diff == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
  CHECK(diff == doctest::Approx(0.2877).epsilon(1e-4));
  const LkjPrior half{0.5, 2};
  CHECK(lkj_log_density(CorrelationMatrix::uniform(2, 0.9), half) >
        lkj_log_density(CorrelationMatrix::identity(2), half));
  CHECK_THROWS_AS(lkj_log_density(CorrelationMatrix::identity(3), two), std::invalid_argument);
}

TEST_CASE("unconstrained round trip") {
  const CorrelationMatrix id = CorrelationMatrix::identity(3);
  CHECK((from_unconstrained(to_unconstrained(id), 3).matrix() - id.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const CorrelationMatrix c = sample_lkj_direct(LkjPrior{1.0, 4}, rng);
    const CorrelationMatrix back = from_unconstrained(to_unconstrained(c), 4);
    CHECK((back.matrix() - c.matrix()).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(from_unconstrained(Eigen::VectorXd::Zero(2), 3), std::invalid_argument);
}

TEST_CASE("from_unconstrained always yields a valid nonnegative correlation matrix") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> N(0.0, 4.0);
  int valid = 0;
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd v(6);
    for (int i = 0; i < 6; ++i) v(i) = N(rng);
    valid += valid_nonnegative(from_unconstrained(v, 4));
  }
  CHECK(valid == 1000);
}

TEST_CASE("log Jacobian matches a finite-difference determinant") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N;
  for (Eigen::Index u : {2, 3, 4}) {
    const Eigen::Index m = unconstrained_size(u);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd v(m);
      for (Eigen::Index i = 0; i < m; ++i) v(i) = N(rng);
      Eigen::MatrixXd J(m, m);
      const double h = 1e-6;
      for (Eigen::Index i = 0; i < m; ++i) {
        Eigen::VectorXd vp = v, vm = v;
        vp(i) += h;
        vm(i) -= h;
        J.col(i) = (offdiag(from_unconstrained(vp, u)) - offdiag(from_unconstrained(vm, u))) / (2 * h);
      }
      const double fd = std::log(std::abs(J.determinant()));
      CHECK(log_jacobian(v, u) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("log target is the sum of its components") {
  MultiTaskDataset d(2, Box::unit(1));
  d = add_observation(d, Eigen::VectorXd::Constant(1, 0.2), 0, 0.5);
  d = add_observation(d, Eigen::VectorXd::Constant(1, 0.4), 1, 0.3);
  const Hyperparams hp = hp1(1.0, 0.3, 0.01);
  const MarginalLikelihood lml(d, hp);
  const LkjPrior prior{2.0, 2};
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.7);
  const LogTarget t = evaluate_log_target(v, prior, &lml);
  const CorrelationMatrix c = from_unconstrained(v, 2);
  CHECK(t.likelihood == doctest::Approx(log_marginal_likelihood(d, c, hp)).epsilon(1e-12));
  CHECK(t.prior == doctest::Approx(lkj_log_density(c, prior)).epsilon(1e-12));
  CHECK(t.jacobian == doctest::Approx(log_jacobian(v, 2)).epsilon(1e-12));
  CHECK(t.total == doctest::Approx(t.likelihood + t.prior + t.jacobian).epsilon(1e-12));
  CHECK(evaluate_log_target(Eigen::VectorXd::Constant(1, 40.0), prior, &lml).total ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("prior-only chain matches direct sampling in the mean") {
  const MultiTaskDataset empty(2, Box::unit(1));
  McmcConfig mc;
  mc.prior_only = true;
  mc.steps = 22000;
  mc.burn_in = 2000;
  mc.thinning = 4;
  mc.seed = 31;
  const SampleSet s = mcmc_sample(empty, hp1(1, 0.2, 0.01), LkjPrior{1.0, 2}, mc);
  double chain = 0.0;
  for (const auto& c : s.samples) chain += c(1, 0) / static_cast<double>(s.size());
  Rng rng(32);
  double direct = 0.0;
  for (int k = 0; k < 5000; ++k) direct += sample_lkj_direct(LkjPrior{1.0, 2}, rng)(1, 0) / 5000.0;
  CHECK(std::abs(chain - direct) < 0.05);
  CHECK(direct == doctest::Approx(0.5).epsilon(0.05));  // uniform on [0, 1) for eta = 1, u = 2
  CHECK(s.acceptance_rate >= 0.1);
  CHECK(s.acceptance_rate <= 0.6);
}

TEST_CASE("chain is deterministic and retains the configured samples") {
  MultiTaskDataset d(2, Box::unit(1));
  d = add_observation(d, Eigen::VectorXd::Constant(1, 0.2), 0, 0.5);
  McmcConfig mc;
  mc.steps = 300;
  mc.burn_in = 100;
  mc.thinning = 4;
  mc.seed = 2;
  const SampleSet a = mcmc_sample(d, hp1(1, 0.3, 0.01), LkjPrior{1.0, 2}, mc);
  const SampleSet b = mcmc_sample(d, hp1(1, 0.3, 0.01), LkjPrior{1.0, 2}, mc);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
  for (const auto& c : a.samples) CHECK(valid_nonnegative(c));
  CHECK(a.meta.burn_in == 100);
  CHECK(a.meta.thinning == 4);
}

TEST_CASE("posterior recovers a strong correlation") {
  TaggedPoints g;
  g.points.resize(80, 1);
  for (int i = 0; i < 80; ++i) {
    g.points(i, 0) = (i % 40) / 39.0;
    g.tasks.push_back(i < 40 ? 0 : 1);
  }
  const Hyperparams hp = hp1(1.0, 0.2, 0.01);
  const Eigen::VectorXd f = sample_prior(CorrelationMatrix::uniform(2, 0.95), hp, g, 77);
  std::mt19937_64 rng(78);
  std::normal_distribution<double> N(0.0, 0.1);
  MultiTaskDataset d(2, Box::unit(1));
  for (int i = 0; i < 80; ++i) d = add_observation(d, g.points.row(i).transpose(), g.tasks[i], f(i) + N(rng));
  McmcConfig mc;
  mc.steps = 2000;
  mc.burn_in = 500;
  mc.thinning = 5;
  mc.seed = 3;
  const SampleSet s = mcmc_sample(d, hp, LkjPrior{1.0, 2}, mc);
  double mean = 0.0;
  for (const auto& c : s.samples) mean += c(1, 0) / static_cast<double>(s.size());
  CHECK(mean > 0.7);
}

TEST_CASE("config validation and divergence") {
  McmcConfig bad;
  bad.steps = 10;
  bad.burn_in = 20;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  MultiTaskDataset d(2, Box::unit(1));
  d = add_observation(d, Eigen::VectorXd::Constant(1, 0.2), 0, 0.5);
  McmcConfig mc;
  mc.steps = 3000;
  mc.burn_in = 0;
  mc.thinning = 1;
  mc.step_size = 1e6;  // every proposal leaves the support
  mc.max_consecutive_rejections = 1000;
  CHECK_THROWS_AS(mcmc_sample(d, hp1(1, 0.3, 0.01), LkjPrior{1.0, 2}, mc), DivergenceError);
}

TEST_CASE("direct sampler stays in the nonnegative cone") {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) CHECK(valid_nonnegative(sample_lkj_direct(LkjPrior{0.7, 3}, rng)));
}
