#include <doctest.h>

#include <numbers>
#include <random>

#include "mtsafe/gp.hpp"

using namespace mtsafe;

namespace {

Hyperparams hp1(double sf2, double ls, double sn2) {
  Hyperparams hp;
  hp.signal_variance = sf2;
  hp.lengthscales = Eigen::VectorXd::Constant(1, ls);
  hp.noise_variance = sn2;
  return hp;
}

MultiTaskDataset make_data(std::size_t u, int per_task, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U;
  std::normal_distribution<double> N;
  MultiTaskDataset d(u, Box::unit(1));
  for (std::size_t t = 0; t < u; ++t)
    for (int k = 0; k < per_task; ++k) d = add_observation(d, Eigen::VectorXd::Constant(1, U(rng)), t, N(rng));
  return d;
}

Eigen::Matrix3d corr3() {
  Eigen::Matrix3d c;
  c << 1, 0.8, 0.3, 0.8, 1, 0.5, 0.3, 0.5, 1;
  return c;
}

}  // namespace

TEST_CASE("dataset is an immutable snapshot with domain checks") {
  const MultiTaskDataset d(2, Box::unit(1));
  const MultiTaskDataset d1 = add_observation(d, Eigen::VectorXd::Constant(1, 0.5), 1, 2.0);
  CHECK(d.size() == 0);
  CHECK(d1.size() == 1);
  CHECK(d1.task_size(1) == 1);
  CHECK_THROWS_AS(add_observation(d, Eigen::VectorXd::Constant(1, 1.5), 0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(add_observation(d, Eigen::VectorXd::Constant(1, 0.5), 2, 0.0), std::invalid_argument);
  const MultiTaskDataset s = d1.task_subset(1);
  CHECK(s.num_tasks() == 1);
  CHECK(s.observations(0)(0) == 2.0);
}

TEST_CASE("posterior matches the dense-inverse formulas") {
  const MultiTaskDataset data = make_data(3, 6, 21);
  const CorrelationMatrix corr(corr3());
  const Hyperparams hp = hp1(1.3, 0.2, 0.05);

  TaggedPoints q;
  q.points.resize(12, 1);
  for (int i = 0; i < 12; ++i) {
    q.points(i, 0) = i / 11.0;
    q.tasks.push_back(static_cast<std::size_t>(i % 3));
  }
  const TaggedPoints train = data.stacked_inputs();
  Eigen::MatrixXd K = multi_task_gram(train, train, corr, hp);
  K.diagonal().array() += hp.noise_variance + hp.jitter();
  const Eigen::MatrixXd Kinv = K.inverse();
  const Eigen::MatrixXd Ks = multi_task_gram(q, train, corr, hp);
  const Eigen::MatrixXd Kss = multi_task_gram(q, q, corr, hp);
  const Eigen::VectorXd y = data.stacked_observations();
  const Eigen::VectorXd mean = Ks * Kinv * y;
  const Eigen::VectorXd var = (Kss - Ks * Kinv * Ks.transpose()).diagonal();

  const PosteriorSlice p = posterior(data, corr, hp, q);
  CHECK((p.mean - mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((p.std.array().square() - var.array()).abs().maxCoeff() < 1e-9);
}

TEST_CASE("log marginal likelihood matches the dense formula") {
  const MultiTaskDataset data = make_data(3, 5, 4);
  const CorrelationMatrix corr(corr3());
  const Hyperparams hp = hp1(0.8, 0.3, 0.02);
  const TaggedPoints train = data.stacked_inputs();
  Eigen::MatrixXd K = multi_task_gram(train, train, corr, hp);
  K.diagonal().array() += hp.noise_variance + hp.jitter();
  const Eigen::VectorXd y = data.stacked_observations();
  const double n = static_cast<double>(y.size());
  const double oracle =
      -0.5 * y.dot(K.inverse() * y) - 0.5 * std::log(K.determinant()) - 0.5 * n * std::log(2 * std::numbers::pi);
  CHECK(log_marginal_likelihood(data, corr, hp) == doctest::Approx(oracle).epsilon(1e-10));
  const MarginalLikelihood cached(data, hp);
  CHECK(cached(corr) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(cached(CorrelationMatrix::identity(3)) ==
        doctest::Approx(log_marginal_likelihood(data, CorrelationMatrix::identity(3), hp)).epsilon(1e-12));
}

TEST_CASE("identity correlation decouples the tasks") {
  const MultiTaskDataset data = make_data(2, 8, 9);
  const Hyperparams hp = hp1(1.0, 0.25, 0.01);
  TaggedPoints q;
  q.points = Eigen::VectorXd::LinSpaced(7, 0.0, 1.0);
  q.tasks.assign(7, 0);
  const PosteriorSlice joint = posterior(data, CorrelationMatrix::identity(2), hp, q);
  const PosteriorSlice single = posterior(data.task_subset(0), CorrelationMatrix::identity(1), hp, q);
  CHECK((joint.mean - single.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((joint.std - single.std).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("prior predictive without data") {
  const MultiTaskDataset empty(2, Box::unit(1));
  TaggedPoints q;
  q.points = Eigen::MatrixXd::Constant(1, 1, 0.3);
  q.tasks = {1};
  const PosteriorSlice p = posterior(empty, CorrelationMatrix::identity(2), hp1(4.0, 0.2, 0.0), q);
  CHECK(p.mean(0) == 0.0);
  CHECK(p.std(0) == doctest::Approx(2.0));
}

TEST_CASE("sample_prior is deterministic and has the prior covariance") {
  TaggedPoints g;
  g.points = Eigen::VectorXd::LinSpaced(3, 0.0, 1.0);
  g.tasks = {0, 0, 0};
  const Hyperparams hp = hp1(1.0, 0.5, 0.0);
  const CorrelationMatrix c = CorrelationMatrix::identity(1);
  CHECK(sample_prior(c, hp, g, 5) == sample_prior(c, hp, g, 5));
  Eigen::Matrix3d emp = Eigen::Matrix3d::Zero();
  const int n = 20000;
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd f = sample_prior(c, hp, g, static_cast<std::uint64_t>(s));
    emp += f * f.transpose() / n;
  }
  CHECK((emp - multi_task_gram(g, g, c, hp)).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("hyperparameter grid search recovers the generating lengthscale") {
  TaggedPoints g;
  g.points = Eigen::VectorXd::LinSpaced(60, 0.0, 1.0);
  g.tasks.assign(60, 0);
  const Hyperparams truth = hp1(1.0, 0.1, 1e-4);
  const Eigen::VectorXd f = sample_prior(CorrelationMatrix::identity(1), truth, g, 17);
  MultiTaskDataset d(1, Box::unit(1));
  for (int i = 0; i < 60; ++i) d = add_observation(d, g.points.row(i).transpose(), 0, f(i));
  HyperparamGrid grid;
  grid.signal_variances = {1.0};
  grid.noise_variances = {1e-4};
  for (double l : {0.02, 0.1, 0.5}) grid.lengthscales.push_back(Eigen::VectorXd::Constant(1, l));
  CHECK(calibrate_hyperparams(d, CorrelationMatrix::identity(1), grid).lengthscales(0) == 0.1);
}
