#include <doctest.h>

#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "mtsafe/mathcore.hpp"

using namespace mtsafe;

namespace {

Hyperparams hp1(double sf2, double ls, double sn2 = 0.0) {
  Hyperparams hp;
  hp.signal_variance = sf2;
  hp.lengthscales = Eigen::VectorXd::Constant(1, ls);
  hp.noise_variance = sn2;
  return hp;
}

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < A.size(); ++i) A(i) = N(rng);
  return A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("se_kernel matches the closed form") {
  Hyperparams hp;
  hp.signal_variance = 2.0;
  hp.lengthscales = Eigen::Vector2d(0.5, 2.0);
  const Eigen::Vector2d x(0.1, 0.3), y(0.4, -0.7);
  const double r2 = std::pow(0.3 / 0.5, 2) + std::pow(1.0 / 2.0, 2);
  CHECK(se_kernel(x, y, hp) == doctest::Approx(2.0 * std::exp(-0.5 * r2)).epsilon(1e-14));
  CHECK(se_kernel(x, x, hp) == doctest::Approx(2.0));
  CHECK_THROWS_AS(se_kernel(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), hp), std::invalid_argument);
}

TEST_CASE("gram is symmetric with the signal variance on the diagonal") {
  Eigen::MatrixXd X(4, 1);
  X << 0.0, 0.2, 0.5, 0.9;
  const Eigen::MatrixXd K = gram(X, X, hp1(3.0, 0.3));
  CHECK((K - K.transpose()).norm() == 0.0);
  CHECK((K.diagonal().array() - 3.0).abs().maxCoeff() < 1e-15);
  CHECK(K(0, 3) == doctest::Approx(3.0 * std::exp(-0.5 * 0.81 / 0.09)));
}

TEST_CASE("tagged multi-task Gram equals the Hadamard product of task and input covariance") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U;
  TaggedPoints pts;
  pts.points.resize(9, 1);
  for (int i = 0; i < 9; ++i) {
    pts.points(i, 0) = U(rng);
    pts.tasks.push_back(static_cast<std::size_t>(i % 3));
  }
  Eigen::Matrix3d c;
  c << 1, 0.4, 0.2, 0.4, 1, 0.3, 0.2, 0.3, 1;
  const CorrelationMatrix corr(c);
  const Hyperparams hp = hp1(1.5, 0.25);
  const Eigen::MatrixXd K = multi_task_gram(pts, pts, corr, hp);
  Eigen::MatrixXd task(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) task(i, j) = c(i % 3, j % 3);
  CHECK((K - task.cwiseProduct(gram(pts.points, pts.points, hp))).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("block Gram on shared inputs equals the Kronecker product") {
  Eigen::MatrixXd X(5, 1);
  X << 0.0, 0.1, 0.35, 0.6, 1.0;
  const CorrelationMatrix corr = CorrelationMatrix::uniform(2, 0.7);
  const Hyperparams hp = hp1(1.0, 0.4);
  const GramMatrix G = multi_task_gram(std::vector<Eigen::MatrixXd>{X, X}, corr, hp);
  const Eigen::MatrixXd kron = Eigen::kroneckerProduct(corr.matrix(), gram(X, X, hp));
  CHECK((G.assembled - kron).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(G.offsets == std::vector<Eigen::Index>{0, 5, 10});
  CHECK(G.block(1, 0).rows() == 5);
}

TEST_CASE("correlation matrix invariants") {
  Eigen::Matrix2d bad;
  bad << 1, -0.1, -0.1, 1;
  CHECK_THROWS_AS(CorrelationMatrix{bad}, std::invalid_argument);
  bad << 1.1, 0.1, 0.1, 1;
  CHECK_THROWS_AS(CorrelationMatrix{bad}, std::invalid_argument);
  bad << 1, 0.2, 0.3, 1;
  CHECK_THROWS_AS(CorrelationMatrix{bad}, std::invalid_argument);
  Eigen::Matrix3d singular;
  singular << 1, 0.99, 0.0, 0.99, 1, 0.99, 0.0, 0.99, 1;
  CHECK_THROWS_AS(CorrelationMatrix{singular}, std::invalid_argument);
  CHECK(CorrelationMatrix::identity(3).matrix() == Eigen::Matrix3d::Identity());
}

TEST_CASE("max_gen_eig: identity versus off-diagonal r is 1 + r") {
  for (double r : {0.0, 0.3, 0.5, 0.9})
    CHECK(max_gen_eig(CorrelationMatrix::identity(2), CorrelationMatrix::uniform(2, r)) ==
          doctest::Approx(1.0 + r).epsilon(1e-12));
  CHECK(max_gen_eig(CorrelationMatrix::uniform(3, 0.4), CorrelationMatrix::uniform(3, 0.4)) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("max_gen_eig agrees with the generalized symmetric eigensolver") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd A = random_spd(4, rng), B = random_spd(4, rng);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> oracle(B, A);  // B v = l A v
    CHECK(max_gen_eig(A, B) == doctest::Approx(oracle.eigenvalues().maxCoeff()).epsilon(1e-10));
  }
  CHECK_THROWS_AS(max_gen_eig(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Identity(2, 2)), NumericalError);
  CHECK_THROWS_AS(max_gen_eig(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(3, 3)),
                  std::invalid_argument);
}

TEST_CASE("is_psd respects the tolerance") {
  Eigen::Matrix2d M;
  M << 1, 0, 0, -1e-9;
  CHECK(is_psd(M, 1e-8));
  CHECK_FALSE(is_psd(M, 1e-10));
}

TEST_CASE("solve_lyapunov residual and symmetry") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  for (int n : {1, 3, 6}) {
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < A.size(); ++i) A(i) = N(rng);
    A.diagonal().array() -= A.eigenvalues().real().maxCoeff() + 0.5;
    const Eigen::MatrixXd Q = random_spd(n, rng);
    const Eigen::MatrixXd P = solve_lyapunov(A, Q);
    CHECK((A * P + P * A.transpose() + Q).norm() < 1e-10 * Q.norm());
    CHECK((P - P.transpose()).norm() == 0.0);
    CHECK(is_psd(P, 1e-12));
  }
  Eigen::Matrix2d unstable;
  unstable << 0.1, 0, 0, -1;
  CHECK_THROWS_AS(solve_lyapunov(unstable, Eigen::Matrix2d::Identity()), std::invalid_argument);
}

TEST_CASE("scalar template instantiates for float") {
  BasicHyperparams<float> hp;
  hp.signal_variance = 1.0f;
  hp.lengthscales = Eigen::VectorXf::Constant(1, 0.5f);
  Eigen::MatrixXf X(2, 1);
  X << 0.0f, 0.5f;
  const Eigen::MatrixXf K = gram(X, X, hp);
  CHECK(K(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
  const BasicCorrelationMatrix<float> c = BasicCorrelationMatrix<float>::uniform(2, 0.5f);
  CHECK(max_gen_eig(BasicCorrelationMatrix<float>::identity(2), c) == doctest::Approx(1.5).epsilon(1e-5));
}
