#include <doctest.h>

#include <cmath>

#include "mtsafe/benchmarks.hpp"
#include "mtsafe/cli/fixtures.hpp"
#include "mtsafe/cli/verification.hpp"

using namespace mtsafe;

namespace {

FirstOrderFilter filt(double a, double b, double c) { return FirstOrderFilter{a, b, c}; }

LtiSystem scalar_system(double a) {
  return LtiSystem{Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                   Eigen::MatrixXd::Zero(1, 1)};
}

}  // namespace

TEST_CASE("h2 norm closed forms and error cases") {
  CHECK(std::abs(h2_norm(scalar_system(-0.5)) - 1.0) <= 1e-10);
  CHECK(h2_norm(scalar_system(-2.0)) == doctest::Approx(0.5).epsilon(1e-12));  // 1 / sqrt(2 * 2)
  CHECK(std::isinf(h2_norm(scalar_system(0.3))));
  CHECK(std::isinf(h2_norm(scalar_system(0.0))));
  LtiSystem with_d = scalar_system(-1.0);
  with_d.D(0, 0) = 1.0;
  CHECK_THROWS_AS(h2_norm(with_d), std::invalid_argument);
  LtiSystem bad = scalar_system(-1.0);
  bad.B = Eigen::MatrixXd::Ones(2, 1);
  CHECK_THROWS_AS(h2_norm(bad), std::invalid_argument);
}

TEST_CASE("h2 norm matches the quadrature oracle on a damped oscillator") {
  LtiSystem osc{Eigen::MatrixXd(2, 2), Eigen::MatrixXd(2, 1), Eigen::MatrixXd(1, 2), Eigen::MatrixXd::Zero(1, 1)};
  osc.A << 0, 1, -4, -0.4;
  osc.B << 0, 1;
  osc.C << 1, 0;
  // ||1 / (s^2 + 2 z w s + w^2)||_2^2 = 1 / (4 z w^3) with w = 2, z = 0.1
  const double closed = std::sqrt(1.0 / (4 * 0.1 * 8.0));
  CHECK(h2_norm(osc) == doctest::Approx(closed).epsilon(1e-10));
  CHECK(cli::h2_norm_quadrature(osc) == doctest::Approx(closed).epsilon(1e-4));
}

TEST_CASE("filter perturbations") {
  const FilterPerturbation id = disturb_filters(0.0, 7, 3);
  CHECK(id.factors.size() == 3);
  for (const auto& f : id.factors) CHECK(f == std::array<double, 3>{1.0, 1.0, 1.0});
  const FilterPerturbation p = disturb_filters(0.1, 7, 3);
  for (const auto& f : p.factors)
    for (double v : f) {
      CHECK(v >= 0.9);
      CHECK(v <= 1.1);
    }
  CHECK(disturb_filters(0.1, 7, 3).factors == p.factors);
  CHECK(disturb_filters(0.1, 8, 3).factors != p.factors);
  const FirstOrderFilter out = p.apply(filt(2.0, 3.0, 4.0), 1);
  CHECK(out.a == doctest::Approx(2.0 * p.factors[1][0]));
  CHECK(out.c == doctest::Approx(4.0 * p.factors[1][2]));
}

TEST_CASE("single-laser loop equals a hand-assembled realization") {
  LaserChainModel m;
  m.natural_frequency = 1.5;
  m.damping = 0.2;
  m.reference_filter = filt(0.3, 0.4, 5.0);
  m.laser_filter = filt(0.6, 0.7, 2.0);
  const double kp = 0.8, ki = 0.1, w2 = 2.25, zw2 = 2 * 0.2 * 1.5;
  // states: reference filter, laser filter, position, velocity, integrator
  // e = 5 xr - (p + 2 xf); u = kp e + ki xi
  Eigen::RowVectorXd e(5);
  e << 5.0, -2.0, -1.0, 0.0, 0.0;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(5, 5);
  A(0, 0) = -0.3;
  A(1, 1) = -0.6;
  A(2, 3) = 1.0;
  A.row(3) = w2 * kp * e;
  A(3, 4) += w2 * ki;
  A(3, 2) -= w2;
  A(3, 3) -= zw2;
  A.row(4) = e;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(5, 2);
  B(0, 0) = 0.4;
  B(1, 1) = 0.7;

  const LtiSystem sys = build_laser_chain(1, Eigen::Vector2d(kp, ki), FilterPerturbation::identity(2), m);
  CHECK((sys.A - A).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((sys.B - B).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((sys.C - e).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(sys.D.isZero());
  CHECK(h2_norm(sys) == doctest::Approx(cli::h2_norm_quadrature(sys)).epsilon(1e-4));
}

TEST_CASE("zero gains give the stable open loop") {
  const LtiSystem open = build_laser_chain(2, Eigen::Vector4d::Zero(), FilterPerturbation::identity(3),
                                           LaserObjectiveOptions::default_laser_model());
  CHECK(open.states() == 7);  // integrators dropped
  CHECK(std::isfinite(h2_norm(open)));
  CHECK_THROWS_AS(build_laser_chain(2, Eigen::Vector2d::Zero(), FilterPerturbation::identity(3),
                                    LaserObjectiveOptions::default_laser_model()),
                  std::invalid_argument);
}

TEST_CASE("laser objective tasks") {
  LaserObjectiveOptions o;
  o.p_disturb = 0.0;
  const BenchmarkObjective same = make_laser_objective(o);
  CHECK(same.num_tasks == 3);
  CHECK(same.noise_std == doctest::Approx(0.3));  // 0.01 T
  const Eigen::Vector4d x(0.5, 0.1, 1.0, 0.05);
  CHECK(same.truth(x, 1) == same.truth(x, 0));
  CHECK(same.truth(x, 2) == same.truth(x, 0));
  o.p_disturb = 0.1;
  const BenchmarkObjective dist = make_laser_objective(o);
  CHECK(dist.truth(x, 0) == same.truth(x, 0));
  CHECK(dist.truth(x, 1) != same.truth(x, 0));
  CHECK(std::abs(dist.truth(x, 1) / dist.truth(x, 0) - 1.0) < 0.3);
}

TEST_CASE("synthetic objective") {
  CHECK(forrester(0.0) == doctest::Approx(4.0 * std::sin(-4.0)).epsilon(1e-14));
  CHECK(forrester(0.0) == doctest::Approx(3.0272).epsilon(1e-4));
  const BenchmarkObjective copy = make_synthetic_objective(1.0, 0.0, 0.0);
  const BenchmarkObjective mix = make_synthetic_objective(0.9, 0.0, 0.0);
  int differs = 0;
  for (int i = 0; i <= 50; ++i) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, i / 50.0);
    CHECK(copy.truth(x, 1) == copy.truth(x, 0));
    CHECK(copy.truth(x, 2) == copy.truth(x, 0));
    differs += mix.truth(x, 1) != mix.truth(x, 0);
  }
  CHECK(differs > 40);

  // Dense 1e6-point oracle for the analytic optimum.
  double best = 1e300, arg = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const double x = i / 999999.0, v = forrester(x);
    if (v < best) best = v, arg = x;
  }
  REQUIRE(mix.true_optimum.has_value());
  CHECK(mix.true_optimum->value <= best + 1e-12);
  CHECK(mix.true_optimum->value == doctest::Approx(best).epsilon(1e-9));
  CHECK(std::abs(mix.true_optimum->x(0) - arg) < 1e-5);
  CHECK(mix.true_optimum->x(0) == doctest::Approx(0.7572).epsilon(1e-4));
  CHECK(best == doctest::Approx(-6.0207).epsilon(1e-4));
}

TEST_CASE("threshold from an unsafe fraction") {
  const BenchmarkObjective obj = make_synthetic_objective(0.9, 0.0, 0.0);
  const double T = threshold_for_unsafe_fraction(obj, 0.3, 200);
  int above = 0;
  for (int i = 0; i < 200; ++i) above += obj.truth(Eigen::VectorXd::Constant(1, i / 199.0), 0) > T;
  CHECK(above == 60);
}

TEST_CASE("objective observation is deterministic in the stream") {
  const BenchmarkObjective obj = make_synthetic_objective(0.9, 0.5, 0.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.4);
  Rng a = make_stream(3, "noise"), b = make_stream(3, "noise");
  CHECK(obj.observe(x, 1, a) == obj.observe(x, 1, b));
}

TEST_CASE("stored laser fixture reproduces") {
  const cli::LaserFixture fx = cli::read_fixture(std::string(MTSAFE_SOURCE_DIR) + "/fixtures/laser_n2.json");
  const BenchmarkObjective obj = make_laser_objective(fx.options);
  CHECK(obj.truth(fx.optimum.x, 0) == fx.optimum.value);
  const LtiSystem sys =
      build_laser_chain(fx.options.n_lasers, fx.optimum.x, FilterPerturbation::identity(3), fx.options.model);
  CHECK(sys.A == fx.nominal_at_optimum.A);
  CHECK(sys.B == fx.nominal_at_optimum.B);
  CHECK(sys.C == fx.nominal_at_optimum.C);
  CHECK(fx.disturbed_stable);
  for (std::size_t t = 1; t < 3; ++t) CHECK(std::isfinite(obj.truth(fx.optimum.x, t)));
  // Exact decimal round trip through the text format.
  const cli::LaserFixture back = cli::laser_fixture_from_json(cli::to_json(fx));
  CHECK(back.optimum.value == fx.optimum.value);
  CHECK(back.nominal_at_optimum.A == fx.nominal_at_optimum.A);
  CHECK(back.hyperparams.lengthscales == fx.hyperparams.lengthscales);
}

TEST_CASE("fixture optimum is the dense-grid minimum") {
  const cli::LaserFixture fx = cli::read_fixture(std::string(MTSAFE_SOURCE_DIR) + "/fixtures/laser_n2.json");
  const KnownOptimum opt = dense_grid_search(make_laser_objective(fx.options), fx.points_per_dim);
  CHECK(opt.value == fx.optimum.value);
  CHECK(opt.x == fx.optimum.x);
}
