#include "mtsafe/safebo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/random/sobol.hpp>

namespace mtsafe {

SafetySpec SafetySpec::main_only(double threshold, std::size_t num_tasks) {
  SafetySpec spec;
  spec.threshold = threshold;
  spec.safety_mask.assign(num_tasks, false);
  if (num_tasks > 0) spec.safety_mask[0] = true;
  return spec;
}

void SafetySpec::validate(std::size_t num_tasks) const {
  if (safety_mask.size() != num_tasks) throw std::invalid_argument("SafetySpec: mask size does not match task count");
  const bool any = std::find(safety_mask.begin(), safety_mask.end(), true) != safety_mask.end();
  if (any && !safety_mask[0]) throw std::invalid_argument("SafetySpec: the main task must be masked");
  if (!std::isfinite(threshold)) throw std::invalid_argument("SafetySpec: threshold must be finite");
}

Eigen::MatrixXd candidate_grid(const Box& domain, const GridConfig& config) {
  const Eigen::Index d = domain.dim();
  if (d < 1) throw std::invalid_argument("candidate_grid: empty domain");
  const Eigen::VectorXd width = domain.upper - domain.lower;
  if (d <= 2) {
    const int m = config.points_per_dim;
    if (m < 2) throw std::invalid_argument("candidate_grid: need at least 2 points per dimension");
    const Eigen::Index total = d == 1 ? m : static_cast<Eigen::Index>(m) * m;
    Eigen::MatrixXd grid(total, d);
    for (Eigen::Index i = 0; i < total; ++i) {
      Eigen::Index rest = i;
      for (Eigen::Index k = 0; k < d; ++k) {
        grid(i, k) = domain.lower(k) + width(k) * static_cast<double>(rest % m) / (m - 1.0);
        rest /= m;
      }
    }
    return grid;
  }
  if (config.sobol_points < 1) throw std::invalid_argument("candidate_grid: need at least one Sobol point");
  boost::random::sobol gen(static_cast<std::size_t>(d));
  const double scale = 1.0 / (static_cast<double>(gen.max()) + 1.0);
  Eigen::MatrixXd grid(config.sobol_points, d);
  for (Eigen::Index i = 0; i < grid.rows(); ++i)
    for (Eigen::Index k = 0; k < d; ++k) grid(i, k) = domain.lower(k) + width(k) * static_cast<double>(gen()) * scale;
  return grid;
}

double expected_improvement(double mean, double std, double best) {
  if (!(std >= 0.0)) throw std::invalid_argument("expected_improvement: std must be nonnegative");
  const double gain = best - mean;
  if (std == 0.0) return std::max(gain, 0.0);
  const double z = gain / std;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return std::max(gain * cdf + std * pdf, 0.0);
}

GridPosterior grid_posterior(const GpModel& model, const Eigen::MatrixXd& grid, double prior_mean) {
  const auto u = static_cast<std::size_t>(model.correlation().size());
  const Eigen::Index g = grid.rows();
  TaggedPoints queries;
  queries.points.resize(g * static_cast<Eigen::Index>(u), grid.cols());
  queries.tasks.resize(static_cast<std::size_t>(g) * u);
  for (std::size_t t = 0; t < u; ++t) {
    queries.points.middleRows(static_cast<Eigen::Index>(t) * g, g) = grid;
    std::fill_n(queries.tasks.begin() + static_cast<std::ptrdiff_t>(t * g), g, t);
  }
  const PosteriorSlice slice = model.predict(queries);
  GridPosterior out;
  for (std::size_t t = 0; t < u; ++t) {
    out.mean.push_back(slice.mean.segment(static_cast<Eigen::Index>(t) * g, g).array() + prior_mean);
    out.std.push_back(slice.std.segment(static_cast<Eigen::Index>(t) * g, g));
  }
  return out;
}

double safety_ucb(const GridPosterior& posterior, std::size_t index, double beta_bar, const SafetySpec& spec) {
  const double root = std::sqrt(beta_bar);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < spec.safety_mask.size() && t < posterior.mean.size(); ++t) {
    if (!spec.safety_mask[t]) continue;
    const auto i = static_cast<Eigen::Index>(index);
    worst = std::max(worst, posterior.mean[t](i) + root * posterior.std[t](i));
  }
  return worst;
}

std::vector<std::size_t> safe_set(const GridPosterior& posterior, double beta_bar, const SafetySpec& spec) {
  if (posterior.mean.empty()) return {};
  if (spec.safety_mask.size() != posterior.mean.size())
    throw std::invalid_argument("safe_set: mask size does not match task count");
  std::vector<std::size_t> out;
  const auto g = static_cast<std::size_t>(posterior.mean[0].size());
  for (std::size_t i = 0; i < g; ++i)
    if (safety_ucb(posterior, i, beta_bar, spec) <= spec.threshold) out.push_back(i);
  return out;
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Running: return "running";
    case RunStatus::BudgetExhausted: return "budget_exhausted";
    case RunStatus::NoSafeAction: return "no_safe_action";
    case RunStatus::Failed: return "failed";
  }
  return "unknown";
}

RunStatus run_status_from_string(const std::string& name) {
  for (RunStatus s : {RunStatus::Running, RunStatus::BudgetExhausted, RunStatus::NoSafeAction, RunStatus::Failed})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown run status: " + name);
}

void SafeBOConfig::validate(std::size_t num_tasks) const {
  hyperparams.validate();
  mcmc.validate();
  if (!(bounds.delta > 0.0 && bounds.delta < 1.0)) throw std::invalid_argument("SafeBOConfig: delta must lie in (0, 1)");
  if (!(bounds.rho > 0.0 && bounds.rho < 1.0)) throw std::invalid_argument("SafeBOConfig: rho must lie in (0, 1)");
  if (!(bounds.beta > 0.0)) throw std::invalid_argument("SafeBOConfig: beta must be positive");
  if (!(eta > 0.0)) throw std::invalid_argument("SafeBOConfig: eta must be positive");
  if (main_budget < 0 || supplementary_per_step < 0) throw std::invalid_argument("SafeBOConfig: budgets must be nonnegative");
  if (mcmc_refresh_every < 1) throw std::invalid_argument("SafeBOConfig: refresh interval must be positive");
  if (force_correlation && static_cast<std::size_t>(force_correlation->size()) != num_tasks)
    throw std::invalid_argument("SafeBOConfig: forced correlation has the wrong size");
}

int Trace::violations() const {
  return static_cast<int>(std::count_if(records.begin(), records.end(), [](const TraceRecord& r) { return r.violation; }));
}

namespace {

MultiTaskDataset shifted(const MultiTaskDataset& data, double offset) {
  MultiTaskDataset out(data.num_tasks(), data.domain());
  for (std::size_t t = 0; t < data.num_tasks(); ++t)
    for (Eigen::Index i = 0; i < data.task_size(t); ++i)
      out = add_observation(out, data.inputs(t).row(i).transpose(), t, data.observations(t)(i) - offset);
  return out;
}

Evaluation evaluate(const Objective& objective, const Eigen::VectorXd& x, std::size_t task, Rng& rng,
                    const SafeBOConfig& config) {
  Evaluation e;
  e.x = x;
  e.task = task;
  e.truth = objective.truth(x, task);
  const double noisy = objective.observe(x, task, rng);
  e.y = std::min(noisy, config.observation_cap);
  if (!std::isfinite(e.y))
    throw NumericalError("observation is not finite; set an observation cap for this objective");
  return e;
}

// argmax over `indices` (or the whole grid when null), lowest index on ties.
std::optional<std::size_t> argmax_ei(const Eigen::VectorXd& mean, const Eigen::VectorXd& std, double best,
                                     const std::vector<std::size_t>* indices, const std::vector<bool>* excluded) {
  std::optional<std::size_t> arg;
  double top = -1.0;
  auto consider = [&](std::size_t i) {
    if (excluded && (*excluded)[i]) return;
    const auto k = static_cast<Eigen::Index>(i);
    const double v = expected_improvement(mean(k), std(k), best);
    if (v > top) {
      top = v;
      arg = i;
    }
  };
  if (indices) {
    for (std::size_t i : *indices) consider(i);
  } else {
    for (std::size_t i = 0; i < static_cast<std::size_t>(mean.size()); ++i) consider(i);
  }
  return arg;
}

SafeBOState step_impl(const SafeBOState& state, const Objective& objective, const SafetySpec& spec,
                      const SafeBOConfig& config, Trace* trace, bool baseline) {
  if (state.status != RunStatus::Running) return state;
  SafeBOState next = state;
  if (state.main_remaining <= 0) {
    next.status = RunStatus::BudgetExhausted;
    return next;
  }
  const std::size_t u = state.dataset.num_tasks();
  spec.validate(u);

  try {
    const MultiTaskDataset model_data = shifted(state.dataset, config.prior_mean);
    const double y_norm = model_data.stacked_observations().norm();
    const double noise_std = std::sqrt(config.hyperparams.noise_variance);

    if (baseline) {
      BoundsConfig fixed = config.bounds;
      fixed.lambda_mode = LambdaMode::Zero;
      next.bounds = exact_bounds(CorrelationMatrix::identity(1), fixed, y_norm, noise_std);
    } else if (config.force_correlation) {
      next.bounds = exact_bounds(*config.force_correlation, config.bounds, y_norm, noise_std);
    } else {
      const bool refresh = !state.samples || state.iteration % config.mcmc_refresh_every == 0;
      if (refresh) {
        McmcConfig mc = config.mcmc;
        Rng seeder = make_stream(config.seed, "mcmc", static_cast<std::uint64_t>(state.iteration));
        mc.seed = seeder();
        if (config.mcmc_warm_start && state.samples) {
          mc.initial = state.samples->meta.final_state;
          mc.step_size = state.samples->meta.final_step_size;
        }
        next.samples = mcmc_sample(model_data, config.hyperparams, LkjPrior{config.eta, static_cast<Eigen::Index>(u)}, mc);
      }
      next.bounds = compute_robust_bounds(*next.samples, config.bounds, y_norm, noise_std);
    }
    const RobustBounds& bounds = *next.bounds;

    const GpModel model(model_data, bounds.sigma_lo, config.hyperparams);
    const GridPosterior post = grid_posterior(model, state.candidate_grid, config.prior_mean);
    next.safe_set = safe_set(post, bounds.beta_bar, spec);
    if (next.safe_set.empty()) {
      SafeBOState halted = state;
      halted.status = RunStatus::NoSafeAction;
      halted.message = "no safe action";
      return halted;
    }

    const std::size_t pick = *argmax_ei(post.mean[0], post.std[0], state.incumbent.y, &next.safe_set, nullptr);
    const Eigen::VectorXd x = state.candidate_grid.row(static_cast<Eigen::Index>(pick)).transpose();
    const Evaluation main_eval = evaluate(objective, x, 0, next.main_noise, config);

    std::vector<Evaluation> supp;
    if (!baseline && u > 1) {
      std::vector<std::vector<bool>> chosen(u, std::vector<bool>(static_cast<std::size_t>(state.candidate_grid.rows()), false));
      for (int k = 0; k < state.supplementary_per_step; ++k) {
        const std::size_t t = 1 + static_cast<std::size_t>(k) % (u - 1);
        const Eigen::VectorXd& obs = state.dataset.observations(t);
        const double best = obs.size() > 0 ? obs.minCoeff() : state.incumbent.y;
        const auto i = argmax_ei(post.mean[t], post.std[t], best, nullptr, &chosen[t]);
        if (!i) continue;
        chosen[t][*i] = true;
        const Eigen::VectorXd xs = state.candidate_grid.row(static_cast<Eigen::Index>(*i)).transpose();
        supp.push_back(evaluate(objective, xs, t, next.supplementary_noise, config));
      }
    }

    next.dataset = add_observation(next.dataset, main_eval.x, 0, main_eval.y);
    for (const auto& e : supp) next.dataset = add_observation(next.dataset, e.x, e.task, e.y);
    if (main_eval.y < next.incumbent.y) next.incumbent = Incumbent{main_eval.x, main_eval.y, main_eval.truth};
    --next.main_remaining;
    ++next.iteration;

    if (trace) {
      TraceRecord r;
      r.iteration = next.iteration;
      r.x = main_eval.x;
      r.y = main_eval.y;
      r.truth = main_eval.truth;
      r.incumbent = next.incumbent.y;
      r.incumbent_truth = next.incumbent.truth;
      r.safe_set_size = next.safe_set.size();
      r.gamma_sq = bounds.gamma_sq;
      r.lambda_sq = bounds.lambda_sq;
      r.beta_bar = bounds.beta_bar;
      r.acceptance_rate = (!baseline && !config.force_correlation && next.samples) ? next.samples->acceptance_rate : 1.0;
      r.violation = main_eval.truth > spec.threshold;
      r.selected_mean = post.mean[0](static_cast<Eigen::Index>(pick));
      r.selected_std = post.std[0](static_cast<Eigen::Index>(pick));
      r.selected_ucb = safety_ucb(post, pick, bounds.beta_bar, spec);
      r.sigma_lo = bounds.sigma_lo.matrix();
      r.supplementary = std::move(supp);
      trace->records.push_back(std::move(r));
    }
  } catch (const NumericalError& e) {
    SafeBOState failed = state;
    failed.status = RunStatus::Failed;
    failed.message = e.what();
    return failed;
  }
  return next;
}

Trace run_impl(const Objective& objective, const Eigen::MatrixXd& initial_safe_points, const SafetySpec& spec,
               const SafeBOConfig& config, bool baseline) {
  Trace trace;
  trace.algorithm = baseline ? "baseline" : "samsbo";
  trace.seed = config.seed;
  trace.threshold = spec.threshold;
  SafeBOState state = make_initial_state(objective, initial_safe_points, config, baseline, &trace);
  while (state.status == RunStatus::Running && state.main_remaining > 0)
    state = step_impl(state, objective, spec, config, &trace, baseline);
  trace.status = state.status == RunStatus::Running ? RunStatus::BudgetExhausted : state.status;
  trace.message = state.message;
  trace.x_opt = state.incumbent.x;
  trace.y_opt = state.incumbent.y;
  return trace;
}

}  // namespace

SafeBOState make_initial_state(const Objective& objective, const Eigen::MatrixXd& initial_safe_points,
                               const SafeBOConfig& config, bool single_task, Trace* trace) {
  const std::size_t u = single_task ? 1 : objective.num_tasks;
  config.validate(u);
  if (initial_safe_points.rows() == 0) throw std::invalid_argument("make_initial_state: initial safe seed is empty");
  if (config.hyperparams.dim() != objective.domain.dim())
    throw std::invalid_argument("make_initial_state: lengthscales do not match the domain");

  SafeBOState state{MultiTaskDataset(u, objective.domain),
                    std::nullopt,
                    candidate_grid(objective.domain, config.grid),
                    {},
                    Incumbent{},
                    config.main_budget,
                    single_task ? 0 : config.supplementary_per_step,
                    0,
                    RunStatus::Running,
                    {},
                    make_stream(config.seed, "noise.main"),
                    make_stream(config.seed, "noise.supp"),
                    std::nullopt};
  for (Eigen::Index i = 0; i < initial_safe_points.rows(); ++i) {
    const Evaluation e = evaluate(objective, initial_safe_points.row(i).transpose(), 0, state.main_noise, config);
    state.dataset = add_observation(state.dataset, e.x, 0, e.y);
    if (e.y < state.incumbent.y) state.incumbent = Incumbent{e.x, e.y, e.truth};
    if (trace) trace->initial.push_back(e);
  }
  return state;
}

SafeBOState samsbo_step(const SafeBOState& state, const Objective& objective, const SafetySpec& spec,
                        const SafeBOConfig& config, Trace* trace) {
  return step_impl(state, objective, spec, config, trace, false);
}

SafeBOState baseline_step(const SafeBOState& state, const Objective& objective, const SafetySpec& spec,
                          const SafeBOConfig& config, Trace* trace) {
  return step_impl(state, objective, spec, config, trace, true);
}

Trace run(const Objective& objective, const Eigen::MatrixXd& initial_safe_points, const SafetySpec& spec,
          const SafeBOConfig& config) {
  return run_impl(objective, initial_safe_points, spec, config, false);
}

Trace run_baseline_single_task(const Objective& objective, const Eigen::MatrixXd& initial_safe_points,
                               double threshold, const SafeBOConfig& config) {
  return run_impl(objective, initial_safe_points, SafetySpec::main_only(threshold, 1), config, true);
}

std::size_t replay_safety_check(const Trace& trace, const Box& domain, std::size_t num_tasks,
                                const SafeBOConfig& config, double threshold) {
  const std::size_t u = trace.algorithm == "baseline" ? 1 : num_tasks;
  MultiTaskDataset data(u, domain);
  for (const auto& e : trace.initial) data = add_observation(data, e.x, e.task, e.y);
  std::size_t passed = 0;
  for (const auto& r : trace.records) {
    const CorrelationMatrix sigma(r.sigma_lo);
    const GpModel model(shifted(data, config.prior_mean), sigma, config.hyperparams);
    TaggedPoints q{r.x.transpose(), {0}};
    const PosteriorSlice p = model.predict(q);
    const double ucb = p.mean(0) + config.prior_mean + std::sqrt(r.beta_bar) * p.std(0);
    // Rounding slack only: the selection and the replay factorize the same
    // matrices in a different order.
    if (ucb <= threshold + 1e-9 * std::max(1.0, std::abs(threshold))) ++passed;
    data = add_observation(data, r.x, 0, r.y);
    for (const auto& e : r.supplementary) data = add_observation(data, e.x, e.task, e.y);
  }
  return passed;
}

int evaluations_to_epsilon(const Trace& trace, double optimum, double epsilon) {
  const Evaluation* seed_best = nullptr;
  for (const auto& e : trace.initial)
    if (e.task == 0 && (!seed_best || e.y < seed_best->y)) seed_best = &e;
  if (seed_best && seed_best->truth <= optimum + epsilon) return 0;
  for (const auto& r : trace.records)
    if (r.incumbent_truth <= optimum + epsilon) return r.iteration;
  return static_cast<int>(trace.records.size()) + 1;
}

}  // namespace mtsafe
