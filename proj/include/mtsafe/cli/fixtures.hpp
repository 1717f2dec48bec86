#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "mtsafe/benchmarks.hpp"

namespace mtsafe::cli {

/// Stored reference data for the laser-chain objective: the settings it was
/// generated with, the dense grid-search optimum and calibrated GP
/// hyperparameters.
struct LaserFixture {
  LaserObjectiveOptions options;
  int points_per_dim = 17;
  KnownOptimum optimum;
  Hyperparams hyperparams;
  double prior_mean = 0.0;
  double observation_cap = 0.0;
  bool disturbed_stable = false;  ///< every disturbed chain is stable at the optimum
  LtiSystem nominal_at_optimum;
};

/// Dense grid search plus a log-marginal-likelihood grid search on a seeded
/// random design. Observation cap 2T and prior mean T.
LaserFixture generate_laser_fixture(const LaserObjectiveOptions& options, int points_per_dim,
                                    std::uint64_t calibration_seed = 7);

nlohmann::json to_json(const LaserFixture& fixture);
LaserFixture laser_fixture_from_json(const nlohmann::json& j);

void write_fixture(const LaserFixture& fixture, const std::filesystem::path& path);
LaserFixture read_fixture(const std::filesystem::path& path);

}  // namespace mtsafe::cli
