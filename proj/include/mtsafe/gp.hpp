#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mtsafe/mathcore.hpp"

namespace mtsafe {

/// Axis-aligned domain box.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const;

  static Box unit(Eigen::Index dim);
};

/// Per-task observation sets D_t, stacked task-major into (X, y~) on demand.
/// Instances are immutable snapshots; appending returns a new dataset.
class MultiTaskDataset {
 public:
  MultiTaskDataset(std::size_t num_tasks, Box domain);

  std::size_t num_tasks() const { return inputs_.size(); }
  Eigen::Index dim() const { return domain_.dim(); }
  const Box& domain() const { return domain_; }

  Eigen::Index size() const;
  Eigen::Index task_size(std::size_t task) const { return inputs_.at(task).rows(); }
  bool empty() const { return size() == 0; }

  const Eigen::MatrixXd& inputs(std::size_t task) const { return inputs_.at(task); }
  const Eigen::VectorXd& observations(std::size_t task) const { return outputs_.at(task); }
  const std::vector<Eigen::MatrixXd>& task_inputs() const { return inputs_; }

  TaggedPoints stacked_inputs() const;
  Eigen::VectorXd stacked_observations() const;

  /// Dataset restricted to one task, re-indexed as a single-task set.
  MultiTaskDataset task_subset(std::size_t task) const;

  friend MultiTaskDataset add_observation(const MultiTaskDataset& data, const Eigen::VectorXd& x,
                                          std::size_t task, double y);

 private:
  Box domain_;
  std::vector<Eigen::MatrixXd> inputs_;
  std::vector<Eigen::VectorXd> outputs_;
};

/// Appends (x, y) to task `task`; throws std::invalid_argument when x is
/// outside the domain or the task index is out of range.
MultiTaskDataset add_observation(const MultiTaskDataset& data, const Eigen::VectorXd& x, std::size_t task,
                                 double y);

GramMatrix multi_task_gram(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp);

struct PosteriorSlice {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

/// Factorized multi-task GP posterior for a fixed dataset, correlation
/// matrix and base hyperparameters. Construct once, query many times.
class GpModel {
 public:
  GpModel(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp);

  PosteriorSlice predict(const TaggedPoints& queries) const;
  double log_marginal_likelihood() const;

  /// (K + sigma_n^2 I)^{-1} y~, the representer weights of the mean.
  const Eigen::VectorXd& weights() const { return alpha_; }
  const TaggedPoints& training_points() const { return train_; }
  const CorrelationMatrix& correlation() const { return corr_; }
  const Hyperparams& hyperparams() const { return hp_; }

 private:
  Box domain_;
  TaggedPoints train_;
  Eigen::VectorXd y_;
  CorrelationMatrix corr_;
  Hyperparams hp_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

PosteriorSlice posterior(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp,
                         const TaggedPoints& queries);

double log_marginal_likelihood(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp);

/// Log marginal likelihood as a function of the correlation matrix alone,
/// with data and base hyperparameters fixed. Caches the base Gram matrix so
/// repeated evaluations (MCMC) only pay for the Hadamard scaling and the
/// Cholesky factorization.
class MarginalLikelihood {
 public:
  MarginalLikelihood(const MultiTaskDataset& data, const Hyperparams& hp);

  double operator()(const CorrelationMatrix& corr) const;
  std::size_t num_tasks() const { return num_tasks_; }

 private:
  std::size_t num_tasks_;
  std::vector<Eigen::Index> offsets_;
  Eigen::MatrixXd base_gram_;
  Eigen::VectorXd y_;
  double diagonal_;
};

/// One draw from N(0, K_grid + 1e-10 I); deterministic in `seed`.
Eigen::VectorXd sample_prior(const CorrelationMatrix& corr, const Hyperparams& hp, const TaggedPoints& grid,
                             std::uint64_t seed);

/// Candidate values for the benchmark-calibration grid search.
struct HyperparamGrid {
  std::vector<double> signal_variances;
  std::vector<Eigen::VectorXd> lengthscales;
  std::vector<double> noise_variances;
};

/// Exhaustive log-marginal-likelihood grid search over base hyperparameters.
/// Used to calibrate benchmark fixtures, never inside the optimization loop.
Hyperparams calibrate_hyperparams(const MultiTaskDataset& data, const CorrelationMatrix& corr,
                                  const HyperparamGrid& grid);

}  // namespace mtsafe
