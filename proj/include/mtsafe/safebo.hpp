#pragma once

// Safe multi-task Bayesian optimization over a finite candidate grid. Each
// step samples the correlation hyperposterior, scales the confidence
// multiplier robustly, restricts the main-task acquisition to grid points
// whose upper confidence bound stays below the threshold, and spends the
// supplementary budget on unconstrained per-task expected improvement.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mtsafe/gp.hpp"
#include "mtsafe/hyperposterior.hpp"
#include "mtsafe/objective.hpp"
#include "mtsafe/random.hpp"
#include "mtsafe/robustbounds.hpp"

namespace mtsafe {

/// Constraint g_i(x) = T - f_i(x) >= 0 for every task i with mask[i] set.
struct SafetySpec {
  double threshold = 30.0;
  std::vector<bool> safety_mask{true};

  static SafetySpec main_only(double threshold, std::size_t num_tasks);
  void validate(std::size_t num_tasks) const;
};

struct GridConfig {
  int points_per_dim = 200;  ///< uniform grid for d <= 2
  int sobol_points = 2048;   ///< scrambled-free Sobol points for d > 2
};

/// Candidate points, one per row.
Eigen::MatrixXd candidate_grid(const Box& domain, const GridConfig& config);

/// Minimization EI: (best - mean) Phi(z) + std phi(z), z = (best - mean) / std.
double expected_improvement(double mean, double std, double best);

/// Posterior mean and std of every task on the candidate grid, with the
/// constant prior mean added back.
struct GridPosterior {
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::VectorXd> std;
};

GridPosterior grid_posterior(const GpModel& model, const Eigen::MatrixXd& grid, double prior_mean = 0.0);

/// Indices i of grid points with mean_t + sqrt(beta_bar) std_t <= T for every
/// masked task t, ascending.
std::vector<std::size_t> safe_set(const GridPosterior& posterior, double beta_bar, const SafetySpec& spec);

/// Largest upper confidence bound over the masked tasks at one grid index.
double safety_ucb(const GridPosterior& posterior, std::size_t index, double beta_bar, const SafetySpec& spec);

enum class RunStatus { Running, BudgetExhausted, NoSafeAction, Failed };

std::string to_string(RunStatus status);
RunStatus run_status_from_string(const std::string& name);

struct SafeBOConfig {
  Hyperparams hyperparams;
  BoundsConfig bounds;
  double eta = 1.0;  ///< LKJ shape
  McmcConfig mcmc;
  int mcmc_refresh_every = 1;
  /// Start each chain at the previous chain's final state and step size.
  bool mcmc_warm_start = true;
  int main_budget = 30;
  int supplementary_per_step = 15;
  /// Constant prior mean; the GP models y - prior_mean.
  double prior_mean = 0.0;
  /// Observations are clipped to this value before entering the model.
  double observation_cap = std::numeric_limits<double>::infinity();
  /// Skip the hyperposterior and treat this matrix as known.
  std::optional<CorrelationMatrix> force_correlation;
  GridConfig grid;
  std::uint64_t seed = 0;

  void validate(std::size_t num_tasks) const;
};

struct Evaluation {
  Eigen::VectorXd x;
  std::size_t task = 0;
  double y = 0.0;  ///< value stored in the dataset (noisy, capped)
  double truth = 0.0;
};

struct Incumbent {
  Eigen::VectorXd x;
  double y = std::numeric_limits<double>::infinity();
  double truth = std::numeric_limits<double>::infinity();
};

/// One iteration of the loop, with everything needed to replay the
/// safe-set decision.
struct TraceRecord {
  int iteration = 0;
  Eigen::VectorXd x;
  double y = 0.0;
  double truth = 0.0;
  double incumbent = 0.0;
  double incumbent_truth = 0.0;
  std::size_t safe_set_size = 0;
  double gamma_sq = 1.0;
  double lambda_sq = 0.0;
  double beta_bar = 0.0;
  double acceptance_rate = 0.0;
  bool violation = false;
  /// Posterior at the selected point under sigma_lo, at selection time.
  double selected_mean = 0.0;
  double selected_std = 0.0;
  double selected_ucb = 0.0;
  Eigen::MatrixXd sigma_lo;
  std::vector<Evaluation> supplementary;
};

struct Trace {
  std::string algorithm;
  std::uint64_t seed = 0;
  double threshold = 0.0;
  std::vector<Evaluation> initial;
  std::vector<TraceRecord> records;
  RunStatus status = RunStatus::Running;
  std::string message;
  Eigen::VectorXd x_opt;
  double y_opt = std::numeric_limits<double>::infinity();

  int violations() const;
};

struct SafeBOState {
  MultiTaskDataset dataset;
  std::optional<RobustBounds> bounds;
  Eigen::MatrixXd candidate_grid;
  std::vector<std::size_t> safe_set;
  Incumbent incumbent;
  int main_remaining = 0;
  int supplementary_per_step = 0;
  int iteration = 0;
  RunStatus status = RunStatus::Running;
  std::string message;

  Rng main_noise;
  Rng supplementary_noise;
  std::optional<SampleSet> samples;  ///< last hyperposterior sample set
};

/// Evaluates the initial safe seed on the main task and builds the state.
/// `single_task` builds a u = 1 state for the baseline.
SafeBOState make_initial_state(const Objective& objective, const Eigen::MatrixXd& initial_safe_points,
                               const SafeBOConfig& config, bool single_task, Trace* trace = nullptr);

/// One SaMSBO iteration. Appends a record to `trace` when given.
SafeBOState samsbo_step(const SafeBOState& state, const Objective& objective, const SafetySpec& spec,
                        const SafeBOConfig& config, Trace* trace = nullptr);

/// One iteration of the single-task baseline (fixed beta, u = 1 model).
SafeBOState baseline_step(const SafeBOState& state, const Objective& objective, const SafetySpec& spec,
                          const SafeBOConfig& config, Trace* trace = nullptr);

Trace run(const Objective& objective, const Eigen::MatrixXd& initial_safe_points, const SafetySpec& spec,
          const SafeBOConfig& config);

Trace run_baseline_single_task(const Objective& objective, const Eigen::MatrixXd& initial_safe_points,
                               double threshold, const SafeBOConfig& config);

/// Rebuilds the dataset seen before each main-task selection and re-checks
/// the safe-set predicate at the selected point. Returns the number of
/// records that pass.
std::size_t replay_safety_check(const Trace& trace, const Box& domain, std::size_t num_tasks,
                                const SafeBOConfig& config, double threshold);

/// First iteration (1-based) whose incumbent truth is within epsilon of
/// `optimum`; records.size() + 1 when never reached.
int evaluations_to_epsilon(const Trace& trace, double optimum, double epsilon);

}  // namespace mtsafe
