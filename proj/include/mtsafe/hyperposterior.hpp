#pragma once

// LKJ prior over task correlation matrices and a random-walk Metropolis
// sampler for the correlation hyperposterior p(Sigma | X, y~).
//
// The sampler works in an unconstrained space of canonical partial
// correlations (CPCs). Each CPC is the logistic image of a free coordinate,
// so CPCs live in (0, 1) and the Cholesky factor of every proposal has
// nonnegative entries. That keeps every correlation nonnegative without
// any rejection step. For u >= 3 the reachable set is the nonnegative-
// Cholesky cone, a subset of all nonnegative correlation matrices.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "mtsafe/gp.hpp"
#include "mtsafe/mathcore.hpp"
#include "mtsafe/random.hpp"

namespace mtsafe {

struct LkjPrior {
  double eta = 1.0;
  Eigen::Index size = 2;

  void validate() const;
};

/// Unnormalized LKJ log density (eta - 1) log det(corr).
double lkj_log_density(const CorrelationMatrix& corr, const LkjPrior& prior);

/// Number of free coordinates for a u x u correlation matrix.
constexpr Eigen::Index unconstrained_size(Eigen::Index u) { return u * (u - 1) / 2; }

/// Coordinates are ordered row-major over the strict lower triangle:
/// (1,0), (2,0), (2,1), (3,0), ...
Eigen::VectorXd to_unconstrained(const CorrelationMatrix& corr);
CorrelationMatrix from_unconstrained(const Eigen::VectorXd& v, Eigen::Index size);

/// log |d offdiag(Sigma) / dv| of the map from_unconstrained.
double log_jacobian(const Eigen::VectorXd& v, Eigen::Index size);

/// Coordinates outside [-kUnconstrainedLimit, kUnconstrainedLimit] carry no
/// mass. Beyond it the logistic map saturates to 0 or 1 in double precision.
inline constexpr double kUnconstrainedLimit = 30.0;

struct McmcConfig {
  int steps = 2000;
  int burn_in = 500;
  int thinning = 5;
  double step_size = 0.5;
  double target_acceptance = 0.3;
  std::uint64_t seed = 0;
  /// Drop the likelihood and sample the prior (sampler validation).
  bool prior_only = false;
  /// Starting point in unconstrained coordinates; zeros when absent.
  std::optional<Eigen::VectorXd> initial;
  int max_consecutive_rejections = 1000;

  void validate() const;
};

struct ChainMeta {
  std::uint64_t seed = 0;
  int burn_in = 0;
  int thinning = 1;
  double final_step_size = 0.0;
  Eigen::VectorXd final_state;
};

struct SampleSet {
  std::vector<CorrelationMatrix> samples;
  double acceptance_rate = 0.0;  // post burn-in
  ChainMeta meta;

  std::size_t size() const { return samples.size(); }
};

/// Components of the sampler's log target at one unconstrained point.
struct LogTarget {
  double likelihood = 0.0;
  double prior = 0.0;
  double jacobian = 0.0;
  double total = 0.0;
};

/// Log target in unconstrained coordinates. `likelihood` may be null for a
/// prior-only target. Returns total = -inf outside the support or when the
/// Gram factorization fails.
LogTarget evaluate_log_target(const Eigen::VectorXd& v, const LkjPrior& prior, const MarginalLikelihood* likelihood);

/// Adaptive random-walk Metropolis over the correlation hyperposterior.
/// Step size adapts toward `target_acceptance` during burn-in and is frozen
/// afterwards. Throws DivergenceError after `max_consecutive_rejections`
/// rejections in a row.
SampleSet mcmc_sample(const MultiTaskDataset& data, const Hyperparams& hp, const LkjPrior& prior,
                      const McmcConfig& config);

/// Exact LKJ draw by the onion method, restricted to matrices whose
/// Cholesky factor is nonnegative (the sampler's support).
CorrelationMatrix sample_lkj_direct(const LkjPrior& prior, Rng& rng);

}  // namespace mtsafe
