#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtsafe/benchmarks.hpp"
#include "mtsafe/safebo.hpp"

namespace mtsafe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;         ///< bad flags or invalid config
inline constexpr int kExitVerification = 3;  ///< a verified property failed
inline constexpr int kExitRuntime = 4;       ///< a run failed while executing

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ObjectiveConfig {
  std::string type = "synthetic";  ///< synthetic | laser
  // synthetic
  double correlation_knob = 0.9;
  /// Threshold from the main-task grid quantile when `threshold` is absent.
  double unsafe_fraction = 0.3;
  // laser
  std::size_t n_lasers = 2;
  double p_disturb = 0.1;
  std::array<std::uint64_t, 2> disturbance_seeds{1, 2};
  // shared
  std::optional<double> threshold;
  std::optional<double> noise_std;
  double observation_cap = std::numeric_limits<double>::infinity();
};

struct InitialSeedConfig {
  int count = 1;
  /// Seed points are drawn among grid points with truth <= T - margin.
  double margin = 0.2;
};

struct McmcSettings {
  int steps = 400;
  int burn_in = 150;
  int thinning = 2;
  double step_size = 0.5;
  int refresh_every = 1;
  bool warm_start = true;
};

struct ExperimentConfig {
  ObjectiveConfig objective;
  std::string algorithm = "samsbo";  ///< samsbo | baseline
  double delta = 0.1;
  double rho = 0.05;
  double beta = 4.0;
  double eta = 1.0;
  LambdaMode lambda_mode = LambdaMode::Zero;
  McmcSettings mcmc;
  int main_budget = 30;
  int supplementary_per_step = 15;
  GridConfig grid;
  Hyperparams hyperparams;
  double prior_mean = 0.0;
  InitialSeedConfig initial;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  /// Added to the incumbent optimum when counting evaluations to epsilon.
  double epsilon = 0.1;

  void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// "1,2,5" or "1-20" (inclusive range) or a mix.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Objective, safety constraint, per-run optimizer settings and the
/// reference optimum an experiment is scored against.
struct Problem {
  BenchmarkObjective objective;
  SafetySpec spec;
  SafeBOConfig base;
  double reference_optimum = 0.0;
};

Problem build_problem(const ExperimentConfig& config);

/// Seeded choice of the initial safe seed among candidate grid points.
Eigen::MatrixXd initial_safe_points(const Problem& problem, const InitialSeedConfig& config, std::uint64_t seed);

}  // namespace mtsafe::cli
