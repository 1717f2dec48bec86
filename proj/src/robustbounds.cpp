#include "mtsafe/robustbounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <unsupported/Eigen/KroneckerProduct>

#include "mtsafe/random.hpp"

namespace mtsafe {

bool in_confidence_set(const CorrelationMatrix& sigma, const CorrelationMatrix& sigma_lo,
                       const CorrelationMatrix& sigma_hi) {
  if (sigma.size() != sigma_lo.size() || sigma_hi.size() != sigma_lo.size()) return false;
  const GeneralizedMaxEigen<double> h(sigma_lo.matrix());
  return h(sigma.matrix()) <= h(sigma_hi.matrix());
}

bool in_confidence_set(const CorrelationMatrix& sigma, const RobustBounds& bounds) {
  return in_confidence_set(sigma, bounds.sigma_lo, bounds.sigma_hi);
}

BoundingPair find_bounds(std::span<const CorrelationMatrix> samples, double delta, std::size_t min_samples,
                         std::uint64_t subset_seed) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("find_bounds: delta must lie in (0, 1)");
  const std::size_t n = samples.size();
  if (n == 0 || n < min_samples) throw std::invalid_argument("find_bounds: too few samples");
  for (const auto& s : samples)
    if (s.size() != samples.front().size()) throw std::invalid_argument("find_bounds: samples differ in size");

  std::vector<std::size_t> candidates(n);
  std::iota(candidates.begin(), candidates.end(), 0);
  if (n > kMaxBoundCandidates) {
    Rng rng = make_stream(subset_seed, "bounds.candidates");
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(kMaxBoundCandidates);
    std::sort(candidates.begin(), candidates.end());
  }

  // Rank of the empirical (1 - delta)-quantile: at least `need` samples
  // satisfy h <= q.
  const auto need = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil((1.0 - delta) * static_cast<double>(n) - 1e-9)));

  BoundingPair best{samples[0], samples[0], std::numeric_limits<double>::infinity(), 0.0, 0, 0};
  std::vector<double> h(n);
  std::vector<std::size_t> order(n);
  for (std::size_t c : candidates) {
    const GeneralizedMaxEigen<double> h_lo(samples[c].matrix());
    for (std::size_t j = 0; j < n; ++j) h[j] = h_lo(samples[j].matrix());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&h](std::size_t a, std::size_t b) { return h[a] < h[b]; });
    const std::size_t hi = order[need - 1];
    const double q = h[hi];
    if (q < best.gamma_sq) {
      const auto members = static_cast<std::size_t>(std::count_if(h.begin(), h.end(), [q](double v) { return v <= q; }));
      best = BoundingPair{samples[c], samples[hi], q, static_cast<double>(members) / static_cast<double>(n), c, hi};
    }
  }
  return best;
}

BoundingPair find_bounds(const SampleSet& samples, double delta, std::size_t min_samples) {
  return find_bounds(std::span<const CorrelationMatrix>(samples.samples), delta, min_samples, samples.meta.seed);
}

double lambda_sq_over_set(std::span<const CorrelationMatrix> samples, const CorrelationMatrix& sigma_lo,
                          const CorrelationMatrix& sigma_hi) {
  const GeneralizedMaxEigen<double> h_lo(sigma_lo.matrix());
  const double limit = h_lo(sigma_hi.matrix());
  double out = 0.0;
  bool any = false;
  for (const auto& s : samples) {
    if (s.size() != sigma_lo.size()) throw std::invalid_argument("lambda_sq_over_set: sample size mismatch");
    if (h_lo(s.matrix()) <= limit) {
      out = std::max(out, max_gen_eig(s.matrix(), sigma_lo.matrix()));
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("lambda_sq_over_set: no sample lies in the confidence set");
  return out;
}

double beta_bar(double gamma_sq, double lambda_sq, double y_norm, double noise_std, double beta_max) {
  if (gamma_sq < 0.0 || lambda_sq < 0.0 || y_norm < 0.0 || beta_max < 0.0 || noise_std < 0.0)
    throw std::invalid_argument("beta_bar: inputs must be nonnegative");
  double mean_term = 0.0;
  if (lambda_sq > 0.0) {
    if (!(noise_std > 0.0)) throw std::invalid_argument("beta_bar: noise_std must be positive when lambda_sq > 0");
    mean_term = std::sqrt(lambda_sq) * 2.0 * y_norm / noise_std;
  }
  const double root = mean_term + std::sqrt(gamma_sq) * std::sqrt(beta_max);
  return root * root;
}

RobustBounds compute_robust_bounds(const SampleSet& samples, const BoundsConfig& config, double y_norm,
                                   double noise_std) {
  if (!(config.rho > 0.0 && config.rho < 1.0)) throw std::invalid_argument("compute_robust_bounds: rho must lie in (0, 1)");
  const BoundingPair pair = find_bounds(samples, config.delta, config.min_samples);
  double lambda_sq = 0.0;
  if (config.lambda_mode == LambdaMode::Theorem)
    lambda_sq = lambda_sq_over_set(samples.samples, pair.sigma_lo, pair.sigma_hi);
  return RobustBounds{pair.sigma_lo,
                      pair.sigma_hi,
                      pair.gamma_sq,
                      lambda_sq,
                      beta_bar(pair.gamma_sq, lambda_sq, y_norm, noise_std, config.beta),
                      config.delta,
                      config.rho,
                      pair.member_fraction};
}

RobustBounds exact_bounds(const CorrelationMatrix& corr, const BoundsConfig& config, double y_norm, double noise_std) {
  const double lambda_sq = config.lambda_mode == LambdaMode::Theorem ? 1.0 : 0.0;
  return RobustBounds{corr, corr, 1.0, lambda_sq, beta_bar(1.0, lambda_sq, y_norm, noise_std, config.beta),
                      config.delta, config.rho, 1.0};
}

double finite_grid_beta(std::size_t grid_size, double rho) {
  if (grid_size == 0 || !(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("finite_grid_beta: invalid arguments");
  const boost::math::normal_distribution<double> standard;
  const double z = boost::math::quantile(boost::math::complement(standard, rho / (2.0 * static_cast<double>(grid_size))));
  return z * z;
}

namespace {

TaggedPoints concatenate(const TaggedPoints& a, const TaggedPoints& b) {
  TaggedPoints out;
  const Eigen::Index d = a.size() > 0 ? a.dim() : b.dim();
  out.points.resize(a.size() + b.size(), d);
  if (a.size() > 0) out.points.topRows(a.size()) = a.points;
  if (b.size() > 0) out.points.bottomRows(b.size()) = b.points;
  out.tasks = a.tasks;
  out.tasks.insert(out.tasks.end(), b.tasks.begin(), b.tasks.end());
  return out;
}

}  // namespace

VarianceDominationReport verify_variance_domination(const MultiTaskDataset& data, const Hyperparams& hp,
                                                    const RobustBounds& bounds, const CorrelationMatrix& probe,
                                                    const TaggedPoints& grid) {
  VarianceDominationReport report;
  report.probe_in_set = in_confidence_set(probe, bounds);
  const double g2 = bounds.gamma_sq;

  const TaggedPoints joint = concatenate(data.stacked_inputs(), grid);
  const Eigen::MatrixXd K_lo = g2 * multi_task_gram(joint, joint, bounds.sigma_lo, hp);
  const Eigen::MatrixXd K_probe = multi_task_gram(joint, joint, probe, hp);
  report.psd_tolerance = 1e-8 * K_lo.trace();
  report.psd_min_eigenvalue = min_sym_eig(K_lo - K_probe);
  report.psd_ok = report.psd_min_eigenvalue >= -report.psd_tolerance;

  const PosteriorSlice lo = posterior(data, bounds.sigma_lo, hp, grid);
  const PosteriorSlice pr = posterior(data, probe, hp, grid);
  const Eigen::ArrayXd gap = pr.std.array().square() - g2 * lo.std.array().square();
  report.max_pointwise_violation = gap.size() > 0 ? gap.maxCoeff() : 0.0;
  report.pointwise_ok = report.max_pointwise_violation <= 1e-9;
  return report;
}

double rkhs_norm_sq_hadamard(const Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& centers,
                             const CorrelationMatrix& sigma, const Hyperparams& hp) {
  if (coeffs.cols() != sigma.size() || coeffs.rows() != centers.rows())
    throw std::invalid_argument("rkhs_norm_sq: coefficient shape mismatch");
  const Eigen::MatrixXd M = coeffs.transpose() * gram(centers, centers, hp) * coeffs;
  const Eigen::MatrixXd sigma_inv = sigma.matrix().llt().solve(Eigen::MatrixXd::Identity(sigma.size(), sigma.size()));
  return sigma_inv.cwiseProduct(M).sum();
}

double rkhs_norm_sq_kronecker(const Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& centers,
                              const CorrelationMatrix& sigma, const Hyperparams& hp) {
  if (coeffs.cols() != sigma.size() || coeffs.rows() != centers.rows())
    throw std::invalid_argument("rkhs_norm_sq: coefficient shape mismatch");
  const Eigen::MatrixXd sigma_inv = sigma.matrix().fullPivLu().inverse();
  const Eigen::MatrixXd big = Eigen::kroneckerProduct(sigma_inv, gram(centers, centers, hp)).eval();
  const Eigen::Map<const Eigen::VectorXd> w(coeffs.data(), coeffs.size());  // column-major vec(W)
  return w.dot(big * w);
}

RkhsNormReport verify_rkhs_norm_bound(const Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& centers,
                                      const CorrelationMatrix& sigma_a, const CorrelationMatrix& sigma_b,
                                      const Hyperparams& hp) {
  RkhsNormReport report;
  report.lambda_sq = max_gen_eig(sigma_b.matrix(), sigma_a.matrix());
  report.norm_sq_a = rkhs_norm_sq_hadamard(coeffs, centers, sigma_a, hp);
  report.norm_sq_b = rkhs_norm_sq_hadamard(coeffs, centers, sigma_b, hp);
  report.norm_sq_a_kron = rkhs_norm_sq_kronecker(coeffs, centers, sigma_a, hp);
  report.norm_sq_b_kron = rkhs_norm_sq_kronecker(coeffs, centers, sigma_b, hp);
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-300}); };
  report.formula_gap = std::max(rel(report.norm_sq_a, report.norm_sq_a_kron), rel(report.norm_sq_b, report.norm_sq_b_kron));
  // Floating-point slack only: equality is attained when sigma_a == sigma_b.
  const double slack = 1e-10 * std::abs(report.norm_sq_b);
  report.bound_holds = report.lambda_sq * report.norm_sq_a >= report.norm_sq_b - slack;
  return report;
}

}  // namespace mtsafe
