#include "mtsafe/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "mtsafe/random.hpp"

namespace mtsafe {

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dim()) return false;
  return ((x - lower).array() >= -tol).all() && ((upper - x).array() >= -tol).all();
}

Box Box::unit(Eigen::Index dim) { return Box{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)}; }

MultiTaskDataset::MultiTaskDataset(std::size_t num_tasks, Box domain) : domain_(std::move(domain)) {
  if (num_tasks < 1) throw std::invalid_argument("MultiTaskDataset: need at least one task");
  if (domain_.dim() < 1 || domain_.upper.size() != domain_.dim() ||
      !(domain_.upper.array() >= domain_.lower.array()).all())
    throw std::invalid_argument("MultiTaskDataset: invalid domain box");
  inputs_.assign(num_tasks, Eigen::MatrixXd(0, domain_.dim()));
  outputs_.assign(num_tasks, Eigen::VectorXd(0));
}

Eigen::Index MultiTaskDataset::size() const {
  Eigen::Index n = 0;
  for (const auto& X : inputs_) n += X.rows();
  return n;
}

TaggedPoints MultiTaskDataset::stacked_inputs() const {
  TaggedPoints out;
  out.points.resize(size(), dim());
  out.tasks.reserve(static_cast<std::size_t>(size()));
  Eigen::Index row = 0;
  for (std::size_t t = 0; t < inputs_.size(); ++t) {
    out.points.middleRows(row, inputs_[t].rows()) = inputs_[t];
    row += inputs_[t].rows();
    out.tasks.insert(out.tasks.end(), static_cast<std::size_t>(inputs_[t].rows()), t);
  }
  return out;
}

Eigen::VectorXd MultiTaskDataset::stacked_observations() const {
  Eigen::VectorXd y(size());
  Eigen::Index row = 0;
  for (const auto& yt : outputs_) {
    y.segment(row, yt.size()) = yt;
    row += yt.size();
  }
  return y;
}

MultiTaskDataset MultiTaskDataset::task_subset(std::size_t task) const {
  MultiTaskDataset out(1, domain_);
  out.inputs_[0] = inputs_.at(task);
  out.outputs_[0] = outputs_.at(task);
  return out;
}

MultiTaskDataset add_observation(const MultiTaskDataset& data, const Eigen::VectorXd& x, std::size_t task,
                                 double y) {
  if (task >= data.num_tasks()) throw std::invalid_argument("add_observation: task index out of range");
  if (!data.domain().contains(x)) throw std::invalid_argument("add_observation: input outside the domain");
  if (!std::isfinite(y)) throw std::invalid_argument("add_observation: observation must be finite");
  MultiTaskDataset out = data;
  auto& X = out.inputs_[task];
  auto& Y = out.outputs_[task];
  X.conservativeResize(X.rows() + 1, Eigen::NoChange);
  X.row(X.rows() - 1) = x.transpose();
  Y.conservativeResize(Y.size() + 1);
  Y(Y.size() - 1) = y;
  return out;
}

GramMatrix multi_task_gram(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp) {
  return multi_task_gram(data.task_inputs(), corr, hp);
}

namespace {

void check_compatible(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp) {
  hp.validate();
  if (static_cast<std::size_t>(corr.size()) != data.num_tasks())
    throw std::invalid_argument("task count does not match correlation size");
  if (hp.dim() != data.dim()) throw std::invalid_argument("lengthscale dimension does not match domain");
}

}  // namespace

GpModel::GpModel(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp)
    : domain_(data.domain()), train_(data.stacked_inputs()), y_(data.stacked_observations()), corr_(corr), hp_(hp) {
  check_compatible(data, corr, hp);
  if (train_.size() == 0) return;
  Eigen::MatrixXd K = multi_task_gram(data, corr, hp).assembled;
  K.diagonal().array() += hp.noise_variance + hp.jitter();
  llt_.compute(K);
  if (llt_.info() != Eigen::Success) throw NumericalError("GpModel: Gram matrix factorization failed");
  alpha_ = llt_.solve(y_);
}

PosteriorSlice GpModel::predict(const TaggedPoints& queries) const {
  const Eigen::Index q = queries.size();
  if (static_cast<std::size_t>(q) != queries.tasks.size())
    throw std::invalid_argument("predict: task tags do not match query count");
  for (Eigen::Index i = 0; i < q; ++i)
    if (!domain_.contains(queries.points.row(i).transpose()))
      throw std::invalid_argument("predict: query outside the domain");
  PosteriorSlice out;
  out.mean = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd var(q);
  for (Eigen::Index i = 0; i < q; ++i) var(i) = hp_.signal_variance * corr_(queries.tasks[i], queries.tasks[i]);
  if (train_.size() > 0 && q > 0) {
    const Eigen::MatrixXd Ks = multi_task_gram(queries, train_, corr_, hp_);
    out.mean = Ks * alpha_;
    const Eigen::MatrixXd V = llt_.matrixL().solve(Ks.transpose());
    var -= V.colwise().squaredNorm().transpose();
  }
  out.std = var.cwiseMax(0.0).cwiseSqrt();
  return out;
}

double GpModel::log_marginal_likelihood() const {
  const auto n = static_cast<double>(train_.size());
  if (train_.size() == 0) throw std::invalid_argument("log_marginal_likelihood: empty dataset");
  const double half_logdet = llt_.matrixLLT().diagonal().array().log().sum();
  return -half_logdet - 0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * y_.dot(alpha_);
}

PosteriorSlice posterior(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp,
                         const TaggedPoints& queries) {
  return GpModel(data, corr, hp).predict(queries);
}

double log_marginal_likelihood(const MultiTaskDataset& data, const CorrelationMatrix& corr, const Hyperparams& hp) {
  if (data.empty()) throw std::invalid_argument("log_marginal_likelihood: empty dataset");
  return GpModel(data, corr, hp).log_marginal_likelihood();
}

MarginalLikelihood::MarginalLikelihood(const MultiTaskDataset& data, const Hyperparams& hp)
    : num_tasks_(data.num_tasks()), y_(data.stacked_observations()), diagonal_(hp.noise_variance + hp.jitter()) {
  hp.validate();
  if (hp.dim() != data.dim()) throw std::invalid_argument("lengthscale dimension does not match domain");
  if (data.empty()) throw std::invalid_argument("MarginalLikelihood: empty dataset");
  const TaggedPoints X = data.stacked_inputs();
  base_gram_ = gram(X.points, X.points, hp);
  offsets_.assign(num_tasks_ + 1, 0);
  for (std::size_t t = 0; t < num_tasks_; ++t) offsets_[t + 1] = offsets_[t] + data.task_size(t);
}

double MarginalLikelihood::operator()(const CorrelationMatrix& corr) const {
  if (static_cast<std::size_t>(corr.size()) != num_tasks_)
    throw std::invalid_argument("MarginalLikelihood: correlation size mismatch");
  const Eigen::Index n = base_gram_.rows();
  Eigen::MatrixXd K(n, n);
  for (std::size_t t = 0; t < num_tasks_; ++t) {
    for (std::size_t t2 = 0; t2 <= t; ++t2) {
      const Eigen::Index r = offsets_[t], c = offsets_[t2];
      const Eigen::Index nr = offsets_[t + 1] - r, nc = offsets_[t2 + 1] - c;
      if (nr == 0 || nc == 0) continue;
      K.block(r, c, nr, nc) = corr(t, t2) * base_gram_.block(r, c, nr, nc);
    }
  }
  K.diagonal().array() += diagonal_;
  Eigen::LLT<Eigen::MatrixXd> llt(K);  // reads the lower triangle only
  if (llt.info() != Eigen::Success) throw NumericalError("MarginalLikelihood: factorization failed");
  const Eigen::VectorXd alpha = llt.solve(y_);
  const double half_logdet = llt.matrixLLT().diagonal().array().log().sum();
  return -half_logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * y_.dot(alpha);
}

Eigen::VectorXd sample_prior(const CorrelationMatrix& corr, const Hyperparams& hp, const TaggedPoints& grid,
                             std::uint64_t seed) {
  if (grid.size() == 0) throw std::invalid_argument("sample_prior: empty grid");
  Eigen::MatrixXd K = multi_task_gram(grid, grid, corr, hp);
  K.diagonal().array() += 1e-10;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw NumericalError("sample_prior: factorization failed");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(grid.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return llt.matrixL() * z;
}

Hyperparams calibrate_hyperparams(const MultiTaskDataset& data, const CorrelationMatrix& corr,
                                  const HyperparamGrid& grid) {
  if (grid.signal_variances.empty() || grid.lengthscales.empty() || grid.noise_variances.empty())
    throw std::invalid_argument("calibrate_hyperparams: empty candidate grid");
  Hyperparams best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (double sv : grid.signal_variances) {
    for (const auto& ls : grid.lengthscales) {
      for (double nv : grid.noise_variances) {
        Hyperparams hp{sv, ls, nv};
        double value;
        try {
          value = log_marginal_likelihood(data, corr, hp);
        } catch (const NumericalError&) {
          continue;
        }
        if (value > best_value) {
          best_value = value;
          best = hp;
        }
      }
    }
  }
  if (!std::isfinite(best_value)) throw NumericalError("calibrate_hyperparams: no candidate could be evaluated");
  return best;
}

}  // namespace mtsafe
