#include "mtsafe/hyperposterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mtsafe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// log(sigmoid(v)) and log(1 - sigmoid(v)) without overflow.
double log_sigmoid(double v) { return v >= 0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v)); }
double log_one_minus_sigmoid(double v) { return log_sigmoid(-v); }

double clamp_coordinate(double v) { return std::clamp(v, -kUnconstrainedLimit, kUnconstrainedLimit); }

Eigen::MatrixXd cholesky_from_cpcs(const Eigen::VectorXd& z, Eigen::Index u) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(u, u);
  L(0, 0) = 1.0;
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < u; ++i) {
    double remaining = 1.0;
    for (Eigen::Index j = 0; j < i; ++j, ++k) {
      L(i, j) = z(k) * std::sqrt(remaining);
      remaining -= L(i, j) * L(i, j);
    }
    L(i, i) = std::sqrt(std::max(remaining, 0.0));
  }
  return L;
}

}  // namespace

void LkjPrior::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("LkjPrior: eta must be positive");
  if (size < 1) throw std::invalid_argument("LkjPrior: size must be at least 1");
}

double lkj_log_density(const CorrelationMatrix& corr, const LkjPrior& prior) {
  prior.validate();
  if (corr.size() != prior.size) throw std::invalid_argument("lkj_log_density: size mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(corr.matrix());
  if (llt.info() != Eigen::Success) throw std::invalid_argument("lkj_log_density: matrix is not positive definite");
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return (prior.eta - 1.0) * log_det;
}

Eigen::VectorXd to_unconstrained(const CorrelationMatrix& corr) {
  const Eigen::Index u = corr.size();
  Eigen::VectorXd v(unconstrained_size(u));
  if (u == 1) return v;
  Eigen::LLT<Eigen::MatrixXd> llt(corr.matrix());
  if (llt.info() != Eigen::Success) throw std::invalid_argument("to_unconstrained: matrix is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < u; ++i) {
    double remaining = 1.0;
    for (Eigen::Index j = 0; j < i; ++j, ++k) {
      if (L(i, j) < -1e-12) throw std::invalid_argument("to_unconstrained: Cholesky factor has a negative entry");
      const double z = std::clamp(L(i, j) / std::sqrt(remaining), 0.0, 1.0);
      remaining -= L(i, j) * L(i, j);
      v(k) = clamp_coordinate(std::log(z) - std::log1p(-z));
    }
  }
  return v;
}

CorrelationMatrix from_unconstrained(const Eigen::VectorXd& v, Eigen::Index size) {
  if (size < 1) throw std::invalid_argument("from_unconstrained: size must be at least 1");
  if (v.size() != unconstrained_size(size)) throw std::invalid_argument("from_unconstrained: wrong vector length");
  Eigen::VectorXd z(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) z(k) = logistic(clamp_coordinate(v(k)));
  const Eigen::MatrixXd L = cholesky_from_cpcs(z, size);
  Eigen::MatrixXd S = L * L.transpose();
  S.diagonal().setOnes();
  S = (0.5 * (S + S.transpose())).eval();
  return CorrelationMatrix(S);
}

double log_jacobian(const Eigen::VectorXd& v, Eigen::Index size) {
  if (v.size() != unconstrained_size(size)) throw std::invalid_argument("log_jacobian: wrong vector length");
  double out = 0.0;
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < size; ++i) {
    for (Eigen::Index j = 0; j < i; ++j, ++k) {
      const double vk = clamp_coordinate(v(k));
      const double z = logistic(vk);
      out += log_sigmoid(vk) + log_one_minus_sigmoid(vk);           // dz/dv
      out += 0.5 * static_cast<double>(size - j - 2) * std::log1p(-z * z);  // CPC -> correlation
    }
  }
  return out;
}

void McmcConfig::validate() const {
  if (steps < 1 || burn_in < 0 || thinning < 1) throw std::invalid_argument("McmcConfig: invalid chain settings");
  if (steps < burn_in) throw std::invalid_argument("McmcConfig: chain length must be at least the burn-in");
  if (steps - burn_in < thinning) throw std::invalid_argument("McmcConfig: chain retains no samples");
  if (!(step_size > 0.0)) throw std::invalid_argument("McmcConfig: step size must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw std::invalid_argument("McmcConfig: target acceptance must be in (0, 1)");
  if (max_consecutive_rejections < 1) throw std::invalid_argument("McmcConfig: invalid rejection limit");
}

LogTarget evaluate_log_target(const Eigen::VectorXd& v, const LkjPrior& prior, const MarginalLikelihood* likelihood) {
  LogTarget out;
  if ((v.array().abs() > kUnconstrainedLimit).any()) {
    out.total = kNegInf;
    return out;
  }
  std::optional<CorrelationMatrix> corr;
  try {
    corr.emplace(from_unconstrained(v, prior.size));
    out.prior = lkj_log_density(*corr, prior);
  } catch (const std::invalid_argument&) {
    out.total = kNegInf;
    return out;
  }
  out.jacobian = log_jacobian(v, prior.size);
  if (likelihood != nullptr) {
    try {
      out.likelihood = (*likelihood)(*corr);
    } catch (const NumericalError&) {
      out.total = kNegInf;
      return out;
    }
  }
  out.total = out.likelihood + out.prior + out.jacobian;
  if (std::isnan(out.total)) out.total = kNegInf;
  return out;
}

SampleSet mcmc_sample(const MultiTaskDataset& data, const Hyperparams& hp, const LkjPrior& prior,
                      const McmcConfig& config) {
  config.validate();
  prior.validate();
  if (static_cast<std::size_t>(prior.size) != data.num_tasks())
    throw std::invalid_argument("mcmc_sample: prior size does not match task count");

  std::optional<MarginalLikelihood> likelihood;
  if (!config.prior_only) {
    if (data.empty()) throw std::invalid_argument("mcmc_sample: empty dataset");
    likelihood.emplace(data, hp);
  }
  const MarginalLikelihood* lik = likelihood ? &*likelihood : nullptr;

  const Eigen::Index u = prior.size;
  const Eigen::Index m = unconstrained_size(u);
  SampleSet out;
  out.meta.seed = config.seed;
  out.meta.burn_in = config.burn_in;
  out.meta.thinning = config.thinning;
  out.meta.final_step_size = config.step_size;

  if (m == 0) {
    const int kept = (config.steps - config.burn_in) / config.thinning;
    out.samples.assign(static_cast<std::size_t>(kept), CorrelationMatrix::identity(1));
    out.acceptance_rate = 1.0;
    out.meta.final_state = Eigen::VectorXd(0);
    return out;
  }

  Eigen::VectorXd state = Eigen::VectorXd::Zero(m);
  if (config.initial) {
    if (config.initial->size() != m) throw std::invalid_argument("mcmc_sample: initial state has wrong length");
    state = config.initial->cwiseMax(-kUnconstrainedLimit + 1.0).cwiseMin(kUnconstrainedLimit - 1.0);
  }
  LogTarget current = evaluate_log_target(state, prior, lik);
  if (!std::isfinite(current.total)) {
    state.setZero();
    current = evaluate_log_target(state, prior, lik);
    if (!std::isfinite(current.total)) throw NumericalError("mcmc_sample: log target is not finite at the start");
  }

  Rng rng(config.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  double log_step = std::log(config.step_size);
  int consecutive_rejections = 0;
  long accepted = 0;
  long proposed = 0;

  Eigen::VectorXd proposal(m);
  for (int s = 0; s < config.steps; ++s) {
    const double step = std::exp(log_step);
    for (Eigen::Index k = 0; k < m; ++k) proposal(k) = state(k) + step * normal(rng);
    const LogTarget candidate = evaluate_log_target(proposal, prior, lik);
    const double log_ratio = candidate.total - current.total;
    const double accept_prob = std::isfinite(candidate.total) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    const bool accept = uniform(rng) < accept_prob;
    if (accept) {
      state = proposal;
      current = candidate;
      consecutive_rejections = 0;
    } else if (++consecutive_rejections >= config.max_consecutive_rejections) {
      std::ostringstream msg;
      msg << "mcmc_sample: " << consecutive_rejections << " consecutive rejections at step " << s
          << " (log target " << current.total << ", step size " << step << ")";
      throw DivergenceError(msg.str());
    }

    if (s < config.burn_in) {
      log_step += (accept_prob - config.target_acceptance) / std::pow(s + 1.0, 0.6);
      log_step = std::clamp(log_step, std::log(1e-4), std::log(20.0));
    } else {
      ++proposed;
      accepted += accept ? 1 : 0;
      if ((s - config.burn_in) % config.thinning == config.thinning - 1)
        out.samples.push_back(from_unconstrained(state, u));
    }
  }
  out.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  out.meta.final_step_size = std::exp(log_step);
  out.meta.final_state = state;
  return out;
}

CorrelationMatrix sample_lkj_direct(const LkjPrior& prior, Rng& rng) {
  prior.validate();
  const Eigen::Index u = prior.size;
  if (u == 1) return CorrelationMatrix::identity(1);
  auto beta_draw = [&rng](double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
  };
  std::normal_distribution<double> normal;

  // Onion construction of the Cholesky factor row by row. Every sign of the
  // off-diagonal factor entries is equally likely and independent of the
  // rest, so taking absolute values is the same as rejecting draws outside
  // the nonnegative-factor support.
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(u, u);
  L(0, 0) = 1.0;
  double beta = prior.eta + static_cast<double>(u - 2) / 2.0;
  const double r = std::abs(2.0 * beta_draw(beta, beta) - 1.0);
  L(1, 0) = r;
  L(1, 1) = std::sqrt(1.0 - r * r);
  for (Eigen::Index k = 2; k < u; ++k) {
    beta -= 0.5;
    const double y = beta_draw(static_cast<double>(k) / 2.0, beta);
    Eigen::VectorXd dir(k);
    for (Eigen::Index i = 0; i < k; ++i) dir(i) = std::abs(normal(rng));
    dir /= dir.norm();
    L.row(k).head(k) = std::sqrt(y) * dir.transpose();
    L(k, k) = std::sqrt(1.0 - y);
  }
  Eigen::MatrixXd S = L * L.transpose();
  S.diagonal().setOnes();
  S = (0.5 * (S + S.transpose())).eval();
  return CorrelationMatrix(S);
}

}  // namespace mtsafe
