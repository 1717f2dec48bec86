#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <random>

#include "mtsafe/gp.hpp"
#include "mtsafe/random.hpp"

namespace mtsafe {

/// Multi-task objective over a shared domain. Task 0 is the main task.
struct Objective {
  std::size_t num_tasks = 1;
  Box domain;
  /// Noise-free value of task `task` at x. May be +inf (e.g. unstable loop).
  std::function<double(const Eigen::VectorXd& x, std::size_t task)> truth;
  double noise_std = 0.0;

  double observe(const Eigen::VectorXd& x, std::size_t task, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double noise = normal(rng);
    return truth(x, task) + noise_std * noise;
  }
};

}  // namespace mtsafe
