#pragma once

// Ground-truth objectives: a one-dimensional multi-fidelity family with a
// known optimum, and a controller-tuning objective that scores PI gains for
// a chain of lasers by the closed-loop H2 norm.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtsafe/objective.hpp"

namespace mtsafe {

struct LtiSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  Eigen::Index states() const { return A.rows(); }
  void validate() const;
};

/// sqrt(trace(C P C^T)) with A P + P A^T + B B^T = 0. Returns +inf when A is
/// not Hurwitz; throws std::invalid_argument when D is nonzero.
double h2_norm(const LtiSystem& sys);

/// x' = -a x + b w, out = c x.
struct FirstOrderFilter {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
};

/// Multiplicative factors (1 + u p) for the (a, b, c) entries of each filter.
struct FilterPerturbation {
  std::vector<std::array<double, 3>> factors;

  static FilterPerturbation identity(std::size_t filters);
  FirstOrderFilter apply(const FirstOrderFilter& nominal, std::size_t index) const;
};

/// Seeded perturbation: every factor is 1 + u p with u ~ U[-1, 1].
FilterPerturbation disturb_filters(double p, std::uint64_t seed, std::size_t filters);

/// Plant and filter parameters of the laser chain.
struct LaserChainModel {
  double natural_frequency = 1.0;
  double damping = 0.1;
  FirstOrderFilter reference_filter{1.0, 1.0, 1.0};
  FirstOrderFilter laser_filter{1.0, 1.0, 1.0};
};

/// Closed loop of a serial laser chain. Laser i tracks the output of laser
/// i - 1 (laser 0 is the filtered reference), each output is disturbed by
/// its own filtered white noise, and z stacks the synchronization errors.
/// State order: reference filter, then per laser (filter, position,
/// velocity, integrator). The integrator of a laser with ki == 0 is dropped,
/// so zero gains give the open-loop chain.
///
/// `controller_params` = (kp_1, ki_1, ..., kp_n, ki_n); the perturbation
/// covers n + 1 filters, the reference filter first.
LtiSystem build_laser_chain(std::size_t n_lasers, const Eigen::VectorXd& controller_params,
                            const FilterPerturbation& perturbation, const LaserChainModel& model = {});

struct KnownOptimum {
  Eigen::VectorXd x;
  double value = 0.0;
};

struct BenchmarkObjective : Objective {
  std::string name;
  double threshold = 0.0;
  std::optional<KnownOptimum> true_optimum;
};

/// Default PI gain box for the laser chain, per laser: kp in [0.05, 1.5],
/// ki in [0.02, 0.3].
Box laser_domain(std::size_t n_lasers);

struct LaserObjectiveOptions {
  std::size_t n_lasers = 2;
  double p_disturb = 0.1;
  std::array<std::uint64_t, 2> disturbance_seeds{1, 2};
  double threshold = 30.0;
  std::optional<double> noise_std;  ///< defaults to 0.01 * threshold
  LaserChainModel model = default_laser_model();

  static LaserChainModel default_laser_model();
};

/// Three tasks: nominal chain (main) and two chains with disturbed filters.
BenchmarkObjective make_laser_objective(const LaserObjectiveOptions& options);

/// f1(x) = (6x - 2)^2 sin(12x - 4) on [0, 1]; f2, f3 blend f1 with fixed
/// seeded smooth random functions: f_t = knob f1 + (1 - knob) g_t.
BenchmarkObjective make_synthetic_objective(double correlation_knob, double noise_std, double threshold);

double forrester(double x);

/// Threshold T with the given fraction of a uniform grid of the main task
/// strictly above T.
double threshold_for_unsafe_fraction(const Objective& objective, double unsafe_fraction, int points_per_dim);

/// Minimum of the main task over a uniform grid with `points_per_dim` points
/// per dimension.
KnownOptimum dense_grid_search(const Objective& objective, int points_per_dim, std::size_t task = 0);

}  // namespace mtsafe
