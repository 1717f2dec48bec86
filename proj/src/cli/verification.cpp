#include "mtsafe/cli/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "mtsafe/gp.hpp"
#include "mtsafe/random.hpp"
#include "mtsafe/robustbounds.hpp"

namespace mtsafe::cli {

bool SuiteReport::passed() const {
  return std::all_of(properties.begin(), properties.end(), [](const PropertyResult& p) { return p.passed; });
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// Random multi-task dataset with ground truth drawn from the prior.
struct Instance {
  MultiTaskDataset data;
  CorrelationMatrix truth;
};

Instance random_instance(Rng& rng, Eigen::Index u, int max_per_task, const Hyperparams& hp) {
  const CorrelationMatrix truth = sample_lkj_direct(LkjPrior{1.0, u}, rng);
  std::uniform_int_distribution<int> count(5, max_per_task);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TaggedPoints pts;
  std::vector<int> sizes(static_cast<std::size_t>(u));
  int total = 0;
  for (auto& s : sizes) total += (s = count(rng));
  pts.points.resize(total, 1);
  for (Eigen::Index t = 0, row = 0; t < u; ++t)
    for (int k = 0; k < sizes[static_cast<std::size_t>(t)]; ++k, ++row) {
      pts.points(row, 0) = unit(rng);
      pts.tasks.push_back(static_cast<std::size_t>(t));
    }
  const Eigen::VectorXd f = sample_prior(truth, hp, pts, rng());
  std::normal_distribution<double> normal;
  MultiTaskDataset data(static_cast<std::size_t>(u), Box::unit(1));
  for (Eigen::Index i = 0; i < pts.size(); ++i)
    data = add_observation(data, pts.points.row(i).transpose(), pts.tasks[static_cast<std::size_t>(i)],
                           f(i) + std::sqrt(hp.noise_variance) * normal(rng));
  return Instance{data, truth};
}

Hyperparams unit_hyperparams(double lengthscale, double noise_variance) {
  Hyperparams hp;
  hp.signal_variance = 1.0;
  hp.lengthscales = Eigen::VectorXd::Constant(1, lengthscale);
  hp.noise_variance = noise_variance;
  return hp;
}

}  // namespace

SuiteReport verify_lemma1(const Lemma1Options& o) {
  const auto t0 = Clock::now();
  SuiteReport report;
  report.suite = "lemma1";
  const Hyperparams hp = unit_hyperparams(0.3, 0.01);
  int psd_pass = 0, point_pass = 0, checks = 0, not_in_set = 0;
  double worst_psd = std::numeric_limits<double>::infinity(), worst_point = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < o.instances; ++i) {
    Rng rng = make_stream(o.seed, "lemma1", static_cast<std::uint64_t>(i));
    const Eigen::Index u = 2 + i % 2;
    const Instance inst = random_instance(rng, u, o.max_per_task, hp);

    McmcConfig mc;
    mc.steps = 1500;
    mc.burn_in = 500;
    mc.thinning = 2;
    mc.seed = rng();
    const SampleSet samples = mcmc_sample(inst.data, hp, LkjPrior{1.0, u}, mc);
    BoundsConfig bc;
    const RobustBounds bounds = compute_robust_bounds(samples, bc, inst.data.stacked_observations().norm(),
                                                      std::sqrt(hp.noise_variance));
    std::vector<std::size_t> members;
    for (std::size_t s = 0; s < samples.size(); ++s)
      if (in_confidence_set(samples.samples[s], bounds)) members.push_back(s);

    TaggedPoints grid;
    grid.points.resize(o.grid_points, 1);
    for (int k = 0; k < o.grid_points; ++k) {
      grid.points(k, 0) = static_cast<double>(k) / (o.grid_points - 1);
      grid.tasks.push_back(static_cast<std::size_t>(k % u));
    }
    for (int p = 0; p < o.probes; ++p) {
      const std::size_t idx = members[static_cast<std::size_t>(p) * members.size() / static_cast<std::size_t>(o.probes)];
      const VarianceDominationReport r =
          verify_variance_domination(inst.data, hp, bounds, samples.samples[idx], grid);
      ++checks;
      psd_pass += r.psd_ok;
      point_pass += r.pointwise_ok;
      not_in_set += !r.probe_in_set;
      worst_psd = std::min(worst_psd, r.psd_min_eigenvalue + r.psd_tolerance);
      worst_point = std::max(worst_point, r.max_pointwise_violation);
    }
  }
  report.metrics = {{"checks", checks},
                    {"psd_pass", psd_pass},
                    {"pointwise_pass", point_pass},
                    {"probes_outside_set", not_in_set},
                    {"worst_psd_margin", worst_psd},
                    {"worst_pointwise_gap", worst_point}};
  report.properties.push_back({"probes drawn from the confidence set", not_in_set == 0,
                               std::to_string(checks - not_in_set) + "/" + std::to_string(checks)});
  report.properties.push_back({"gamma^2 K_lo - K_probe is PSD", psd_pass == checks,
                               std::to_string(psd_pass) + "/" + std::to_string(checks) +
                                   ", worst margin " + fmt(worst_psd)});
  report.properties.push_back({"gamma^2 var_lo >= var_probe on the grid", point_pass == checks,
                               std::to_string(point_pass) + "/" + std::to_string(checks) +
                                   ", worst gap " + fmt(worst_point)});
  report.seconds = seconds_since(t0);
  return report;
}

SuiteReport verify_lemma2(const Lemma2Options& o) {
  const auto t0 = Clock::now();
  SuiteReport report;
  report.suite = "lemma2";
  int holds = 0, agree = 0;
  double worst_gap = 0.0, worst_ratio = std::numeric_limits<double>::infinity();
  for (int i = 0; i < o.instances; ++i) {
    Rng rng = make_stream(o.seed, "lemma2", static_cast<std::uint64_t>(i));
    std::uniform_int_distribution<int> tasks(2, 4), centers(3, 10);
    std::uniform_real_distribution<double> unit(0.0, 1.0), eta(0.5, 3.0), ls(0.1, 0.6);
    std::normal_distribution<double> normal;
    const Eigen::Index u = tasks(rng);
    const Eigen::Index m = centers(rng);
    Hyperparams hp;
    hp.signal_variance = 0.5 + unit(rng);
    hp.lengthscales = Eigen::VectorXd(2);
    hp.lengthscales << ls(rng), ls(rng);
    Eigen::MatrixXd X(m, 2), W(m, u);
    for (Eigen::Index r = 0; r < m; ++r) X.row(r) << unit(rng), unit(rng);
    for (Eigen::Index r = 0; r < W.size(); ++r) W(r) = normal(rng);
    const CorrelationMatrix a = sample_lkj_direct(LkjPrior{eta(rng), u}, rng);
    const CorrelationMatrix b = sample_lkj_direct(LkjPrior{eta(rng), u}, rng);
    const RkhsNormReport r = verify_rkhs_norm_bound(W, X, a, b, hp);
    holds += r.bound_holds;
    agree += r.formula_gap <= o.formula_tolerance;
    worst_gap = std::max(worst_gap, r.formula_gap);
    worst_ratio = std::min(worst_ratio, r.lambda_sq * r.norm_sq_a / r.norm_sq_b);
  }
  report.metrics = {{"instances", o.instances},
                    {"inequality_pass", holds},
                    {"formula_agree", agree},
                    {"worst_formula_gap", worst_gap},
                    {"min_ratio", worst_ratio}};
  report.properties.push_back({"lambda^2 ||mu||_a^2 >= ||mu||_b^2", holds == o.instances,
                               std::to_string(holds) + "/" + std::to_string(o.instances) +
                                   " inequality passes, min ratio " + fmt(worst_ratio)});
  report.properties.push_back({"Hadamard and Kronecker norms agree", agree == o.instances,
                               std::to_string(agree) + "/" + std::to_string(o.instances) + ", worst relative gap " +
                                   fmt(worst_gap)});
  report.seconds = seconds_since(t0);
  return report;
}

SuiteReport verify_coverage(const CoverageOptions& o) {
  const auto t0 = Clock::now();
  SuiteReport report;
  report.suite = "coverage";
  const Hyperparams hp = unit_hyperparams(0.2, 0.01);
  const double noise_std = std::sqrt(hp.noise_variance);
  const Eigen::Index u = o.tasks;

  TaggedPoints grid;
  grid.points.resize(o.grid_points * u, 1);
  for (Eigen::Index t = 0, row = 0; t < u; ++t)
    for (int k = 0; k < o.grid_points; ++k, ++row) {
      grid.points(row, 0) = static_cast<double>(k) / (o.grid_points - 1);
      grid.tasks.push_back(static_cast<std::size_t>(t));
    }
  const double beta = finite_grid_beta(static_cast<std::size_t>(grid.size()), o.rho);

  int covered = 0, covered_known = 0, failed_runs = 0;
  double sum_gamma = 0.0, sum_lambda = 0.0, sum_beta_bar = 0.0;
  for (int trial = 0; trial < o.trials; ++trial) {
    Rng rng = make_stream(o.seed, "coverage", static_cast<std::uint64_t>(trial));
    const CorrelationMatrix truth = sample_lkj_direct(LkjPrior{o.eta, u}, rng);
    const Eigen::VectorXd f = sample_prior(truth, hp, grid, rng());

    std::normal_distribution<double> normal;
    MultiTaskDataset data(static_cast<std::size_t>(u), Box::unit(1));
    std::vector<int> order(static_cast<std::size_t>(o.grid_points));
    for (Eigen::Index t = 0; t < u; ++t) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int k = 0; k < o.per_task; ++k) {
        const Eigen::Index row = t * o.grid_points + order[static_cast<std::size_t>(k)];
        data = add_observation(data, grid.points.row(row).transpose(), static_cast<std::size_t>(t),
                               f(row) + noise_std * normal(rng));
      }
    }

    McmcConfig mc;
    mc.steps = o.mcmc_steps;
    mc.burn_in = o.mcmc_burn_in;
    mc.thinning = o.mcmc_thinning;
    mc.seed = rng();
    BoundsConfig bc;
    bc.delta = o.delta;
    bc.rho = o.rho;
    bc.beta = beta;
    bc.lambda_mode = LambdaMode::Theorem;
    try {
      const SampleSet samples = mcmc_sample(data, hp, LkjPrior{o.eta, u}, mc);
      const RobustBounds bounds = compute_robust_bounds(samples, bc, data.stacked_observations().norm(), noise_std);
      const PosteriorSlice p = posterior(data, bounds.sigma_lo, hp, grid);
      const double root = std::sqrt(bounds.beta_bar);
      covered += ((f - p.mean).cwiseAbs().array() <= root * p.std.array()).all();
      sum_gamma += bounds.gamma_sq;
      sum_lambda += bounds.lambda_sq;
      sum_beta_bar += bounds.beta_bar;
    } catch (const NumericalError&) {
      ++failed_runs;  // counted as not covered
    }
    const PosteriorSlice known = posterior(data, truth, hp, grid);
    covered_known += ((f - known.mean).cwiseAbs().array() <= std::sqrt(beta) * known.std.array()).all();
  }
  const double n = o.trials;
  const double fraction = covered / n, known_fraction = covered_known / n;
  const double target = (1.0 - o.delta) * (1.0 - o.rho) - o.slack;
  const double ok_runs = std::max(1.0, n - failed_runs);
  report.metrics = {{"trials", n},
                    {"coverage", fraction},
                    {"target", target},
                    {"known_sigma_coverage", known_fraction},
                    {"beta", beta},
                    {"mean_gamma_sq", sum_gamma / ok_runs},
                    {"mean_lambda_sq", sum_lambda / ok_runs},
                    {"mean_beta_bar", sum_beta_bar / ok_runs},
                    {"failed_runs", failed_runs}};
  report.properties.push_back({"known-Sigma bound holds with probability >= 1 - rho", known_fraction >= 1.0 - o.rho,
                               fmt(known_fraction) + " with beta " + fmt(beta)});
  report.properties.push_back({"robust bound coverage >= (1-delta)(1-rho) - slack", fraction >= target,
                               fmt(fraction) + " >= " + fmt(target) + " over " + std::to_string(o.trials) + " trials"});
  report.seconds = seconds_since(t0);
  return report;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

SuiteReport verify_mcmc(const McmcSuiteOptions& o) {
  const auto t0 = Clock::now();
  SuiteReport report;
  report.suite = "mcmc";
  const MultiTaskDataset empty(2, Box::unit(1));
  const Hyperparams hp = unit_hyperparams(0.2, 0.01);
  for (std::size_t e = 0; e < o.etas.size(); ++e) {
    const double eta = o.etas[e];
    McmcConfig mc;
    mc.prior_only = true;
    mc.burn_in = o.burn_in;
    mc.thinning = o.thinning;
    mc.steps = o.burn_in + o.samples * o.thinning;
    mc.seed = make_stream(o.seed, "mcmc.chain", e)();
    const SampleSet chain = mcmc_sample(empty, hp, LkjPrior{eta, 2}, mc);
    std::vector<double> a, b;
    for (const auto& s : chain.samples) a.push_back(s(1, 0));
    Rng rng = make_stream(o.seed, "mcmc.direct", e);
    for (int k = 0; k < o.samples; ++k) b.push_back(sample_lkj_direct(LkjPrior{eta, 2}, rng)(1, 0));
    const double ks = ks_statistic(a, b);
    const std::string key = "eta_" + fmt(eta);
    report.metrics[key + "_ks"] = ks;
    report.metrics[key + "_acceptance"] = chain.acceptance_rate;
    report.metrics[key + "_samples"] = static_cast<double>(a.size());
    report.properties.push_back({"KS(chain, direct) < " + fmt(o.ks_limit) + " at eta = " + fmt(eta), ks < o.ks_limit,
                                 "KS " + fmt(ks) + ", acceptance " + fmt(chain.acceptance_rate) + ", " +
                                     std::to_string(a.size()) + " samples"});
  }
  report.seconds = seconds_since(t0);
  return report;
}

double h2_norm_quadrature(const LtiSystem& sys, int steps) {
  sys.validate();
  const Eigen::VectorXcd eig = sys.A.eigenvalues();
  const double decay = -eig.real().maxCoeff();
  if (!(decay > 0.0)) return std::numeric_limits<double>::infinity();
  if (steps % 2 == 1) ++steps;
  const double horizon = 50.0 / decay;
  const double h = horizon / steps;
  const Eigen::MatrixXd step = (sys.A * h).exp();
  Eigen::MatrixXd phi_b = sys.B;  // exp(A t) B
  double sum = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double g = (sys.C * phi_b).squaredNorm();
    const double w = (k == 0 || k == steps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    sum += w * g;
    phi_b = step * phi_b;
  }
  return std::sqrt(sum * h / 3.0);
}

SuiteReport verify_h2(const H2Options& o) {
  const auto t0 = Clock::now();
  SuiteReport report;
  report.suite = "h2";

  LtiSystem scalar{Eigen::MatrixXd::Constant(1, 1, -0.5), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                   Eigen::MatrixXd::Zero(1, 1)};
  const double closed = std::abs(h2_norm(scalar) - 1.0);
  report.metrics["scalar_error"] = closed;
  report.properties.push_back({"1/(s + 0.5) has H2 norm 1", closed <= 1e-10, "error " + fmt(closed)});

  double worst = 0.0;
  int agree = 0;
  for (int i = 0; i < o.systems; ++i) {
    Rng rng = make_stream(o.seed, "h2", static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> margin(0.2, 1.0);
    const Eigen::Index n = o.states;
    LtiSystem sys{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, 2), Eigen::MatrixXd(2, n), Eigen::MatrixXd::Zero(2, 2)};
    for (Eigen::Index k = 0; k < sys.A.size(); ++k) sys.A(k) = normal(rng);
    for (Eigen::Index k = 0; k < sys.B.size(); ++k) sys.B(k) = normal(rng);
    for (Eigen::Index k = 0; k < sys.C.size(); ++k) sys.C(k) = normal(rng);
    const double shift = sys.A.eigenvalues().real().maxCoeff() + margin(rng);
    sys.A.diagonal().array() -= shift;
    const double lyap = h2_norm(sys), quad = h2_norm_quadrature(sys);
    const double rel = std::abs(lyap - quad) / quad;
    worst = std::max(worst, rel);
    agree += rel <= o.tolerance;
  }
  report.metrics["systems"] = o.systems;
  report.metrics["agree"] = agree;
  report.metrics["worst_relative_error"] = worst;
  report.properties.push_back({"Lyapunov H2 matches quadrature within " + fmt(o.tolerance), agree == o.systems,
                               std::to_string(agree) + "/" + std::to_string(o.systems) + ", worst relative error " +
                                   fmt(worst)});
  report.seconds = seconds_since(t0);
  return report;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"lemma1", "lemma2", "coverage", "mcmc", "h2"};
  return names;
}

SuiteReport run_verification(const std::string& suite) {
  if (suite == "lemma1") return verify_lemma1();
  if (suite == "lemma2") return verify_lemma2();
  if (suite == "coverage") return verify_coverage();
  if (suite == "mcmc") return verify_mcmc();
  if (suite == "h2") return verify_h2();
  throw std::invalid_argument("unknown verification suite '" + suite + "'");
}

}  // namespace mtsafe::cli
