#pragma once

// Robust scaling of the GP uniform error bound under an unknown task
// correlation matrix. A bounding pair (lo, hi) of correlation matrices
// defines the confidence set
//
//   C(lo, hi) = { S : h(lo, S) <= h(lo, hi) },   h(A, B) = max eig A^{-1} B,
//
// which must carry at least 1 - delta of the hyperposterior mass. On that
// set the posterior variance under any S is dominated by gamma^2 times the
// variance under lo, and RKHS norms are dominated by lambda^2 times the
// norm under lo. The combined confidence multiplier is
//
//   beta_bar = (lambda * 2 ||y~|| / sigma_n + gamma * sqrt(beta))^2.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "mtsafe/gp.hpp"
#include "mtsafe/hyperposterior.hpp"
#include "mtsafe/mathcore.hpp"

namespace mtsafe {

struct RobustBounds {
  CorrelationMatrix sigma_lo;
  CorrelationMatrix sigma_hi;
  double gamma_sq = 1.0;
  double lambda_sq = 0.0;
  double beta_bar = 0.0;
  double delta = 0.1;
  double rho = 0.05;
  double member_fraction = 1.0;
};

/// True iff h(bounds.sigma_lo, sigma) <= h(bounds.sigma_lo, bounds.sigma_hi).
bool in_confidence_set(const CorrelationMatrix& sigma, const RobustBounds& bounds);
bool in_confidence_set(const CorrelationMatrix& sigma, const CorrelationMatrix& sigma_lo,
                       const CorrelationMatrix& sigma_hi);

struct BoundingPair {
  CorrelationMatrix sigma_lo;
  CorrelationMatrix sigma_hi;
  double gamma_sq = 1.0;
  double member_fraction = 1.0;
  std::size_t lo_index = 0;
  std::size_t hi_index = 0;
};

inline constexpr std::size_t kMinBoundSamples = 20;
inline constexpr std::size_t kMaxBoundCandidates = 300;

/// Chooses sigma_lo among candidate samples to minimize the empirical
/// (1 - delta)-quantile q of { h(sigma_lo, S_j) }; sigma_hi is the sample
/// attaining q and gamma^2 = q. Every sample is a candidate when there are
/// at most kMaxBoundCandidates of them, otherwise a seeded random subset.
/// Ties go to the lowest sample index.
BoundingPair find_bounds(std::span<const CorrelationMatrix> samples, double delta,
                         std::size_t min_samples = kMinBoundSamples, std::uint64_t subset_seed = 0);
BoundingPair find_bounds(const SampleSet& samples, double delta, std::size_t min_samples = kMinBoundSamples);

/// max over in-set samples S of h(S, sigma_lo).
double lambda_sq_over_set(std::span<const CorrelationMatrix> samples, const CorrelationMatrix& sigma_lo,
                          const CorrelationMatrix& sigma_hi);

double beta_bar(double gamma_sq, double lambda_sq, double y_norm, double noise_std, double beta_max);

enum class LambdaMode {
  Zero,     ///< lambda^2 = 0, posterior-mean uncertainty ignored
  Theorem,  ///< lambda^2 = max over the confidence set of h(S, sigma_lo)
};

struct BoundsConfig {
  double delta = 0.1;
  double rho = 0.05;
  double beta = 4.0;  ///< constant scaling function beta(S)
  LambdaMode lambda_mode = LambdaMode::Zero;
  std::size_t min_samples = kMinBoundSamples;
};

/// Full pipeline: bounding pair, lambda^2 per mode, and beta_bar.
RobustBounds compute_robust_bounds(const SampleSet& samples, const BoundsConfig& config, double y_norm,
                                   double noise_std);

/// Bounds for a known correlation matrix: lo = hi = corr, gamma^2 = lambda^2 = 1
/// (or lambda^2 = 0 in Zero mode).
RobustBounds exact_bounds(const CorrelationMatrix& corr, const BoundsConfig& config, double y_norm, double noise_std);

/// Constant beta for a finite input set of `grid_size` points such that the
/// known-hyperparameter bound holds with probability >= 1 - rho by a union
/// bound over two-sided Gaussian tails.
double finite_grid_beta(std::size_t grid_size, double rho);

struct VarianceDominationReport {
  bool psd_ok = false;
  double psd_min_eigenvalue = 0.0;
  double psd_tolerance = 0.0;
  bool pointwise_ok = false;
  double max_pointwise_violation = 0.0;  ///< max of var_probe - gamma^2 var_lo
  bool probe_in_set = false;
};

/// Checks gamma^2 K_lo - K_probe for positive semidefiniteness on the joint
/// train + grid Gram matrix, and gamma^2 var_lo(x) >= var_probe(x) pointwise.
VarianceDominationReport verify_variance_domination(const MultiTaskDataset& data, const Hyperparams& hp,
                                                    const RobustBounds& bounds, const CorrelationMatrix& probe,
                                                    const TaggedPoints& grid);

/// Squared RKHS norm of mu_i(x) = sum_a coeffs(a, i) k(x, c_a) under the
/// multi-task kernel Sigma k, via the Hadamard identity 1^T (Sigma^{-1} o M) 1
/// with M = coeffs^T K_c coeffs.
double rkhs_norm_sq_hadamard(const Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& centers,
                             const CorrelationMatrix& sigma, const Hyperparams& hp);

/// Same norm via the Kronecker form vec(W)^T (Sigma^{-1} (x) K_c) vec(W).
double rkhs_norm_sq_kronecker(const Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& centers,
                              const CorrelationMatrix& sigma, const Hyperparams& hp);

struct RkhsNormReport {
  double lambda_sq = 1.0;
  double norm_sq_a = 0.0;  ///< Hadamard form under sigma_a
  double norm_sq_b = 0.0;  ///< Hadamard form under sigma_b
  double norm_sq_a_kron = 0.0;
  double norm_sq_b_kron = 0.0;
  double formula_gap = 0.0;  ///< max relative disagreement between the two forms
  bool bound_holds = false;  ///< lambda^2 ||mu||_a^2 >= ||mu||_b^2
};

/// lambda^2 = h(sigma_b, sigma_a); checks lambda^2 ||mu||^2_a >= ||mu||^2_b.
RkhsNormReport verify_rkhs_norm_bound(const Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& centers,
                                      const CorrelationMatrix& sigma_a, const CorrelationMatrix& sigma_b,
                                      const Hyperparams& hp);

}  // namespace mtsafe
