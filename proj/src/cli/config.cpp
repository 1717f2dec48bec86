#include "mtsafe/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mtsafe::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T value{};
  read(j, key, value, where);
  out = value;
}

LambdaMode parse_lambda_mode(const std::string& s) {
  if (s == "zero") return LambdaMode::Zero;
  if (s == "theorem") return LambdaMode::Theorem;
  throw ConfigError("lambda_mode: expected 'zero' or 'theorem', got '" + s + "'");
}

std::vector<std::uint64_t> parse_seeds(const json& j) {
  if (j.is_string()) return parse_seed_list(j.get<std::string>());
  if (j.is_array()) {
    std::vector<std::uint64_t> out;
    for (const auto& v : j) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError("seeds: entries must be nonnegative integers");
      out.push_back(v.get<std::uint64_t>());
    }
    return out;
  }
  if (j.is_object()) {
    check_keys(j, "seeds", {"first", "count"});
    std::uint64_t first = 1;
    int count = 0;
    read(j, "first", first, "seeds");
    read(j, "count", count, "seeds");
    if (count < 1) throw ConfigError("seeds.count must be positive");
    std::vector<std::uint64_t> out;
    for (int i = 0; i < count; ++i) out.push_back(first + static_cast<std::uint64_t>(i));
    return out;
  }
  throw ConfigError("seeds: expected a list, a range string or {first, count}");
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  auto number = [&text](const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), ::isdigit)) throw ConfigError("invalid seed list '" + text + "'");
    return std::stoull(s);
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(item));
    } else {
      const auto lo = number(item.substr(0, dash)), hi = number(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("invalid seed range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

void ExperimentConfig::validate() const {
  if (objective.type != "synthetic" && objective.type != "laser")
    throw ConfigError("objective.type must be 'synthetic' or 'laser'");
  if (algorithm != "samsbo" && algorithm != "baseline") throw ConfigError("algorithm must be 'samsbo' or 'baseline'");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (main_budget < 1) throw ConfigError("budget.main must be positive");
  if (supplementary_per_step < 0) throw ConfigError("budget.supplementary_per_step must be nonnegative");
  if (seeds.empty()) throw ConfigError("seed list must be nonempty");
  if (initial.count < 1) throw ConfigError("initial.count must be positive");
  if (objective.n_lasers < 1) throw ConfigError("objective.n_lasers must be positive");
  if (!(objective.p_disturb >= 0.0)) throw ConfigError("objective.p_disturb must be nonnegative");
  if (!(objective.correlation_knob >= 0.0 && objective.correlation_knob <= 1.0))
    throw ConfigError("objective.correlation_knob must lie in [0, 1]");
  if (mcmc.refresh_every < 1) throw ConfigError("mcmc.refresh_every must be positive");
  try {
    hyperparams.validate();
    McmcConfig mc;
    mc.steps = mcmc.steps;
    mc.burn_in = mcmc.burn_in;
    mc.thinning = mcmc.thinning;
    mc.step_size = mcmc.step_size;
    mc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const Eigen::Index dim = objective.type == "synthetic" ? 1 : static_cast<Eigen::Index>(2 * objective.n_lasers);
  if (hyperparams.dim() != dim)
    throw ConfigError("hyperparams.lengthscales must have " + std::to_string(dim) + " entries for this objective");
}

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "config", {"objective", "algorithm", "delta", "rho", "beta", "eta", "lambda_mode", "mcmc", "budget",
                           "grid", "hyperparams", "prior_mean", "initial", "seeds", "output_dir", "epsilon"});
  ExperimentConfig c;
  if (j.contains("objective")) {
    const json& o = j.at("objective");
    check_keys(o, "objective", {"type", "correlation_knob", "unsafe_fraction", "n_lasers", "p_disturb",
                                "disturbance_seeds", "threshold", "noise_std", "observation_cap"});
    read(o, "type", c.objective.type, "objective");
    read(o, "correlation_knob", c.objective.correlation_knob, "objective");
    read(o, "unsafe_fraction", c.objective.unsafe_fraction, "objective");
    read(o, "n_lasers", c.objective.n_lasers, "objective");
    read(o, "p_disturb", c.objective.p_disturb, "objective");
    read(o, "disturbance_seeds", c.objective.disturbance_seeds, "objective");
    read_optional(o, "threshold", c.objective.threshold, "objective");
    read_optional(o, "noise_std", c.objective.noise_std, "objective");
    read(o, "observation_cap", c.objective.observation_cap, "objective");
  }
  read(j, "algorithm", c.algorithm, "config");
  read(j, "delta", c.delta, "config");
  read(j, "rho", c.rho, "config");
  read(j, "beta", c.beta, "config");
  read(j, "eta", c.eta, "config");
  if (j.contains("lambda_mode")) {
    std::string mode;
    read(j, "lambda_mode", mode, "config");
    c.lambda_mode = parse_lambda_mode(mode);
  }
  if (j.contains("mcmc")) {
    const json& m = j.at("mcmc");
    check_keys(m, "mcmc", {"steps", "burn_in", "thinning", "step_size", "refresh_every", "warm_start"});
    read(m, "steps", c.mcmc.steps, "mcmc");
    read(m, "burn_in", c.mcmc.burn_in, "mcmc");
    read(m, "thinning", c.mcmc.thinning, "mcmc");
    read(m, "step_size", c.mcmc.step_size, "mcmc");
    read(m, "refresh_every", c.mcmc.refresh_every, "mcmc");
    read(m, "warm_start", c.mcmc.warm_start, "mcmc");
  }
  if (j.contains("budget")) {
    const json& b = j.at("budget");
    check_keys(b, "budget", {"main", "supplementary_per_step"});
    read(b, "main", c.main_budget, "budget");
    read(b, "supplementary_per_step", c.supplementary_per_step, "budget");
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, "grid", {"points_per_dim", "sobol_points"});
    read(g, "points_per_dim", c.grid.points_per_dim, "grid");
    read(g, "sobol_points", c.grid.sobol_points, "grid");
  }
  if (!j.contains("hyperparams")) throw ConfigError("config: 'hyperparams' is required");
  {
    const json& h = j.at("hyperparams");
    check_keys(h, "hyperparams", {"signal_variance", "lengthscales", "noise_variance"});
    std::vector<double> ls;
    read(h, "signal_variance", c.hyperparams.signal_variance, "hyperparams");
    read(h, "lengthscales", ls, "hyperparams");
    read(h, "noise_variance", c.hyperparams.noise_variance, "hyperparams");
    c.hyperparams.lengthscales = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
  }
  read(j, "prior_mean", c.prior_mean, "config");
  if (j.contains("initial")) {
    const json& s = j.at("initial");
    check_keys(s, "initial", {"count", "margin"});
    read(s, "count", c.initial.count, "initial");
    read(s, "margin", c.initial.margin, "initial");
  }
  if (j.contains("seeds")) c.seeds = parse_seeds(j.at("seeds"));
  read(j, "output_dir", c.output_dir, "config");
  read(j, "epsilon", c.epsilon, "config");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json to_json(const ExperimentConfig& c) {
  json o{{"type", c.objective.type},
         {"correlation_knob", c.objective.correlation_knob},
         {"unsafe_fraction", c.objective.unsafe_fraction},
         {"n_lasers", c.objective.n_lasers},
         {"p_disturb", c.objective.p_disturb},
         {"disturbance_seeds", c.objective.disturbance_seeds}};
  if (c.objective.threshold) o["threshold"] = *c.objective.threshold;
  if (c.objective.noise_std) o["noise_std"] = *c.objective.noise_std;
  if (std::isfinite(c.objective.observation_cap)) o["observation_cap"] = c.objective.observation_cap;
  return json{{"objective", o},
              {"algorithm", c.algorithm},
              {"delta", c.delta},
              {"rho", c.rho},
              {"beta", c.beta},
              {"eta", c.eta},
              {"lambda_mode", c.lambda_mode == LambdaMode::Zero ? "zero" : "theorem"},
              {"mcmc",
               {{"steps", c.mcmc.steps},
                {"burn_in", c.mcmc.burn_in},
                {"thinning", c.mcmc.thinning},
                {"step_size", c.mcmc.step_size},
                {"refresh_every", c.mcmc.refresh_every},
                {"warm_start", c.mcmc.warm_start}}},
              {"budget", {{"main", c.main_budget}, {"supplementary_per_step", c.supplementary_per_step}}},
              {"grid", {{"points_per_dim", c.grid.points_per_dim}, {"sobol_points", c.grid.sobol_points}}},
              {"hyperparams",
               {{"signal_variance", c.hyperparams.signal_variance},
                {"lengthscales", std::vector<double>(c.hyperparams.lengthscales.data(),
                                                     c.hyperparams.lengthscales.data() + c.hyperparams.lengthscales.size())},
                {"noise_variance", c.hyperparams.noise_variance}}},
              {"prior_mean", c.prior_mean},
              {"initial", {{"count", c.initial.count}, {"margin", c.initial.margin}}},
              {"seeds", c.seeds},
              {"output_dir", c.output_dir},
              {"epsilon", c.epsilon}};
}

Problem build_problem(const ExperimentConfig& c) {
  c.validate();
  Problem p;
  if (c.objective.type == "synthetic") {
    const double noise = c.objective.noise_std.value_or(0.02);
    double threshold = 0.0;
    if (c.objective.threshold) {
      threshold = *c.objective.threshold;
    } else {
      threshold = threshold_for_unsafe_fraction(make_synthetic_objective(c.objective.correlation_knob, noise, 0.0),
                                                c.objective.unsafe_fraction, c.grid.points_per_dim);
    }
    p.objective = make_synthetic_objective(c.objective.correlation_knob, noise, threshold);
    p.reference_optimum = p.objective.true_optimum->value;
  } else {
    LaserObjectiveOptions opt;
    opt.n_lasers = c.objective.n_lasers;
    opt.p_disturb = c.objective.p_disturb;
    opt.disturbance_seeds = c.objective.disturbance_seeds;
    opt.threshold = c.objective.threshold.value_or(30.0);
    opt.noise_std = c.objective.noise_std;
    p.objective = make_laser_objective(opt);
    // Best main-task value among the candidates the optimizer can propose.
    const Eigen::MatrixXd grid = candidate_grid(p.objective.domain, c.grid);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < grid.rows(); ++i) best = std::min(best, p.objective.truth(grid.row(i).transpose(), 0));
    p.reference_optimum = best;
  }

  const bool baseline = c.algorithm == "baseline";
  p.spec = SafetySpec::main_only(p.objective.threshold, baseline ? 1 : p.objective.num_tasks);

  SafeBOConfig& b = p.base;
  b.hyperparams = c.hyperparams;
  b.bounds.delta = c.delta;
  b.bounds.rho = c.rho;
  b.bounds.beta = c.beta;
  b.bounds.lambda_mode = c.lambda_mode;
  b.eta = c.eta;
  b.mcmc.steps = c.mcmc.steps;
  b.mcmc.burn_in = c.mcmc.burn_in;
  b.mcmc.thinning = c.mcmc.thinning;
  b.mcmc.step_size = c.mcmc.step_size;
  b.mcmc_refresh_every = c.mcmc.refresh_every;
  b.mcmc_warm_start = c.mcmc.warm_start;
  b.main_budget = c.main_budget;
  b.supplementary_per_step = c.supplementary_per_step;
  b.prior_mean = c.prior_mean;
  b.observation_cap = c.objective.observation_cap;
  b.grid = c.grid;
  return p;
}

Eigen::MatrixXd initial_safe_points(const Problem& problem, const InitialSeedConfig& config, std::uint64_t seed) {
  const Eigen::MatrixXd grid = candidate_grid(problem.objective.domain, problem.base.grid);
  std::vector<Eigen::Index> eligible;
  const double limit = problem.objective.threshold - config.margin;
  for (Eigen::Index i = 0; i < grid.rows(); ++i)
    if (problem.objective.truth(grid.row(i).transpose(), 0) <= limit) eligible.push_back(i);
  if (static_cast<int>(eligible.size()) < config.count)
    throw std::runtime_error("initial_safe_points: not enough grid points below T - margin");
  Rng rng = make_stream(seed, "initial");
  std::shuffle(eligible.begin(), eligible.end(), rng);
  Eigen::MatrixXd out(config.count, grid.cols());
  for (int k = 0; k < config.count; ++k) out.row(k) = grid.row(eligible[static_cast<std::size_t>(k)]);
  return out;
}

}  // namespace mtsafe::cli
