#include "mtsafe/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mtsafe/mathcore.hpp"
#include "mtsafe/random.hpp"

namespace mtsafe {

void LtiSystem::validate() const {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("LtiSystem: A must be square");
  if (B.rows() != n) throw std::invalid_argument("LtiSystem: B row count must match A");
  if (C.cols() != n) throw std::invalid_argument("LtiSystem: C column count must match A");
  if (D.rows() != C.rows() || D.cols() != B.cols()) throw std::invalid_argument("LtiSystem: D has the wrong shape");
}

double h2_norm(const LtiSystem& sys) {
  sys.validate();
  if (sys.D.size() > 0 && sys.D.cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("h2_norm: feedthrough D must be zero");
  if (sys.states() == 0) return 0.0;
  const Eigen::VectorXcd eig = sys.A.eigenvalues();
  if (!(eig.real().maxCoeff() < 0.0)) return std::numeric_limits<double>::infinity();
  Eigen::MatrixXd P;
  try {
    P = solve_lyapunov(sys.A, sys.B * sys.B.transpose());
  } catch (const std::invalid_argument&) {
    // Eigenvalues that straddle zero within rounding.
    return std::numeric_limits<double>::infinity();
  }
  const double energy = (sys.C * P * sys.C.transpose()).trace();
  return std::sqrt(std::max(energy, 0.0));
}

FilterPerturbation FilterPerturbation::identity(std::size_t filters) {
  FilterPerturbation out;
  out.factors.assign(filters, {1.0, 1.0, 1.0});
  return out;
}

FirstOrderFilter FilterPerturbation::apply(const FirstOrderFilter& nominal, std::size_t index) const {
  if (index >= factors.size()) throw std::invalid_argument("FilterPerturbation: filter index out of range");
  const auto& f = factors[index];
  return FirstOrderFilter{nominal.a * f[0], nominal.b * f[1], nominal.c * f[2]};
}

FilterPerturbation disturb_filters(double p, std::uint64_t seed, std::size_t filters) {
  if (!(p >= 0.0)) throw std::invalid_argument("disturb_filters: p must be nonnegative");
  FilterPerturbation out = FilterPerturbation::identity(filters);
  if (p == 0.0) return out;
  Rng rng = make_stream(seed, "disturbance");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& f : out.factors)
    for (double& v : f) v = 1.0 + u(rng) * p;
  return out;
}

LtiSystem build_laser_chain(std::size_t n_lasers, const Eigen::VectorXd& controller_params,
                            const FilterPerturbation& perturbation, const LaserChainModel& model) {
  if (n_lasers < 1) throw std::invalid_argument("build_laser_chain: need at least one laser");
  if (controller_params.size() != static_cast<Eigen::Index>(2 * n_lasers))
    throw std::invalid_argument("build_laser_chain: expected 2 gains per laser");
  if (perturbation.factors.size() != n_lasers + 1)
    throw std::invalid_argument("build_laser_chain: perturbation must cover n + 1 filters");

  // State indices.
  std::vector<Eigen::Index> filt(n_lasers), pos(n_lasers), vel(n_lasers), integ(n_lasers, -1);
  Eigen::Index n = 1;
  for (std::size_t i = 0; i < n_lasers; ++i) {
    filt[i] = n++;
    pos[i] = n++;
    vel[i] = n++;
    if (controller_params(2 * i + 1) != 0.0) integ[i] = n++;
  }
  const auto inputs = static_cast<Eigen::Index>(n_lasers + 1);
  const auto outputs = static_cast<Eigen::Index>(n_lasers);

  LtiSystem sys{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, inputs), Eigen::MatrixXd::Zero(outputs, n),
                Eigen::MatrixXd::Zero(outputs, inputs)};

  const FirstOrderFilter ref = perturbation.apply(model.reference_filter, 0);
  sys.A(0, 0) = -ref.a;
  sys.B(0, 0) = ref.b;

  // Output of laser i (row over the state); laser 0 is the reference.
  Eigen::RowVectorXd prev = Eigen::RowVectorXd::Zero(n);
  prev(0) = ref.c;
  const double w2 = model.natural_frequency * model.natural_frequency;
  for (std::size_t i = 0; i < n_lasers; ++i) {
    const FirstOrderFilter f = perturbation.apply(model.laser_filter, i + 1);
    sys.A(filt[i], filt[i]) = -f.a;
    sys.B(filt[i], static_cast<Eigen::Index>(i + 1)) = f.b;

    Eigen::RowVectorXd y = Eigen::RowVectorXd::Zero(n);
    y(pos[i]) = 1.0;
    y(filt[i]) = f.c;
    const Eigen::RowVectorXd e = prev - y;

    const double kp = controller_params(2 * i);
    const double ki = controller_params(2 * i + 1);
    Eigen::RowVectorXd u = kp * e;
    if (integ[i] >= 0) {
      u(integ[i]) += ki;
      sys.A.row(integ[i]) = e;
    }
    sys.A(pos[i], vel[i]) = 1.0;
    sys.A.row(vel[i]) += w2 * u;
    sys.A(vel[i], pos[i]) -= w2;
    sys.A(vel[i], vel[i]) -= 2.0 * model.damping * model.natural_frequency;

    sys.C.row(static_cast<Eigen::Index>(i)) = e;
    prev = y;
  }
  return sys;
}

Box laser_domain(std::size_t n_lasers) {
  Box box{Eigen::VectorXd(2 * n_lasers), Eigen::VectorXd(2 * n_lasers)};
  for (std::size_t i = 0; i < n_lasers; ++i) {
    box.lower(2 * i) = 0.05;
    box.upper(2 * i) = 2.0;
    box.lower(2 * i + 1) = 0.01;
    box.upper(2 * i + 1) = 0.3;
  }
  return box;
}

LaserChainModel LaserObjectiveOptions::default_laser_model() {
  LaserChainModel model;
  model.reference_filter = FirstOrderFilter{0.1, 0.1, 60.0};
  model.laser_filter = FirstOrderFilter{0.1, 0.1, 60.0};
  return model;
}

BenchmarkObjective make_laser_objective(const LaserObjectiveOptions& options) {
  if (options.n_lasers < 1) throw std::invalid_argument("make_laser_objective: need at least one laser");
  const std::size_t filters = options.n_lasers + 1;
  std::vector<FilterPerturbation> perturbations{FilterPerturbation::identity(filters),
                                                disturb_filters(options.p_disturb, options.disturbance_seeds[0], filters),
                                                disturb_filters(options.p_disturb, options.disturbance_seeds[1], filters)};

  BenchmarkObjective obj;
  obj.name = "laser";
  obj.num_tasks = 3;
  obj.domain = laser_domain(options.n_lasers);
  obj.threshold = options.threshold;
  obj.noise_std = options.noise_std.value_or(0.01 * options.threshold);
  const std::size_t n = options.n_lasers;
  const LaserChainModel model = options.model;
  obj.truth = [n, model, perturbations](const Eigen::VectorXd& x, std::size_t task) {
    if (task >= perturbations.size()) throw std::invalid_argument("laser objective: task index out of range");
    return h2_norm(build_laser_chain(n, x, perturbations[task], model));
  };
  return obj;
}

double forrester(double x) {
  const double a = 6.0 * x - 2.0;
  return a * a * std::sin(12.0 * x - 4.0);
}

namespace {

// Smooth random function on [0, 1]: random Fourier features approximating a
// zero-mean SE-kernel GP draw with the given lengthscale and output scale.
struct RandomFeatureFunction {
  Eigen::VectorXd frequencies;
  Eigen::VectorXd phases;
  Eigen::VectorXd weights;
  double scale = 1.0;

  RandomFeatureFunction(std::uint64_t seed, double lengthscale, double output_std, int features = 200) {
    Rng rng = make_stream(seed, "synthetic.task");
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    frequencies.resize(features);
    phases.resize(features);
    weights.resize(features);
    for (int m = 0; m < features; ++m) {
      frequencies(m) = normal(rng) / lengthscale;
      phases(m) = phase(rng);
      weights(m) = normal(rng);
    }
    scale = output_std * std::sqrt(2.0 / features);
  }

  double operator()(double x) const {
    return scale * (weights.array() * (frequencies.array() * x + phases.array()).cos()).sum();
  }
};

// Golden-section refinement of a unimodal bracket.
double golden_minimize(const std::function<double(double)>& f, double a, double b) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  while (b - a > 1e-12) {
    if (f(c) < f(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace

BenchmarkObjective make_synthetic_objective(double correlation_knob, double noise_std, double threshold) {
  if (!(correlation_knob >= 0.0 && correlation_knob <= 1.0))
    throw std::invalid_argument("make_synthetic_objective: knob must lie in [0, 1]");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("make_synthetic_objective: noise_std must be nonnegative");

  const std::vector<RandomFeatureFunction> others{RandomFeatureFunction(101, 0.1, 5.0),
                                                  RandomFeatureFunction(202, 0.1, 5.0)};
  BenchmarkObjective obj;
  obj.name = "synthetic";
  obj.num_tasks = 3;
  obj.domain = Box::unit(1);
  obj.threshold = threshold;
  obj.noise_std = noise_std;
  const double knob = correlation_knob;
  obj.truth = [knob, others](const Eigen::VectorXd& x, std::size_t task) {
    if (x.size() != 1) throw std::invalid_argument("synthetic objective: input must be one-dimensional");
    const double f1 = forrester(x(0));
    if (task == 0 || knob == 1.0) {
      if (task > 2) throw std::invalid_argument("synthetic objective: task index out of range");
      return f1;
    }
    if (task > 2) throw std::invalid_argument("synthetic objective: task index out of range");
    return knob * f1 + (1.0 - knob) * others[task - 1](x(0));
  };
  const double x_star = golden_minimize(forrester, 0.7, 0.8);
  obj.true_optimum = KnownOptimum{Eigen::VectorXd::Constant(1, x_star), forrester(x_star)};
  return obj;
}

namespace {

template <typename F>
void for_each_grid_point(const Box& box, int points_per_dim, F&& visit) {
  if (points_per_dim < 2) throw std::invalid_argument("grid: need at least 2 points per dimension");
  const Eigen::Index d = box.dim();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Eigen::VectorXd x(d);
  while (true) {
    for (Eigen::Index k = 0; k < d; ++k)
      x(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * idx[static_cast<std::size_t>(k)] / (points_per_dim - 1.0);
    visit(x);
    Eigen::Index k = 0;
    while (k < d && ++idx[static_cast<std::size_t>(k)] == points_per_dim) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == d) break;
  }
}

}  // namespace

double threshold_for_unsafe_fraction(const Objective& objective, double unsafe_fraction, int points_per_dim) {
  if (!(unsafe_fraction >= 0.0 && unsafe_fraction < 1.0))
    throw std::invalid_argument("threshold_for_unsafe_fraction: fraction must lie in [0, 1)");
  std::vector<double> values;
  for_each_grid_point(objective.domain, points_per_dim, [&](const Eigen::VectorXd& x) { values.push_back(objective.truth(x, 0)); });
  std::sort(values.begin(), values.end());
  // Largest T with at least `unsafe_fraction` of the grid strictly above it.
  const auto above = static_cast<std::size_t>(std::ceil(unsafe_fraction * static_cast<double>(values.size())));
  const std::size_t keep = values.size() - above;
  if (keep == 0) return values.front() - 1.0;
  return values[keep - 1];
}

KnownOptimum dense_grid_search(const Objective& objective, int points_per_dim, std::size_t task) {
  KnownOptimum best{Eigen::VectorXd(), std::numeric_limits<double>::infinity()};
  for_each_grid_point(objective.domain, points_per_dim, [&](const Eigen::VectorXd& x) {
    const double v = objective.truth(x, task);
    if (v < best.value) best = KnownOptimum{x, v};
  });
  return best;
}

}  // namespace mtsafe
