#include "mtsafe/cli/experiment.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "mtsafe/cli/trace_io.hpp"

namespace mtsafe::cli {

Trace run_one(const ExperimentConfig& config, const Problem& problem, std::uint64_t seed) {
  SafeBOConfig cfg = problem.base;
  cfg.seed = seed;
  const Eigen::MatrixXd s0 = initial_safe_points(problem, config.initial, seed);
  if (config.algorithm == "baseline") return run_baseline_single_task(problem.objective, s0, problem.spec.threshold, cfg);
  return run(problem.objective, s0, problem.spec, cfg);
}

unsigned worker_count() {
  if (const char* env = std::getenv("MTSAFE_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<Trace> run_seeds(const ExperimentConfig& config, const Problem& problem,
                             const std::vector<std::uint64_t>& seeds, unsigned workers) {
  std::vector<Trace> out(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        out[i] = run_one(config, problem, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seeds.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  Problem problem;
  try {
    problem = build_problem(config);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir / ("config_" + config.algorithm + ".json"));
    cfg << to_json(config).dump(2) << '\n';
  }

  std::vector<Trace> traces(config.seeds.size());
  std::vector<std::string> failures(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const std::uint64_t seed = config.seeds[i];
      try {
        traces[i] = run_one(config, problem, seed);
      } catch (const std::exception& e) {
        traces[i].algorithm = config.algorithm;
        traces[i].seed = seed;
        traces[i].threshold = problem.spec.threshold;
        traces[i].status = RunStatus::Failed;
        traces[i].message = e.what();
      }
      if (traces[i].status == RunStatus::Failed) failures[i] = traces[i].message;
      write_trace_file(traces[i], dir / ("trace_" + config.algorithm + "_seed" + std::to_string(seed) + ".ndjson"));
      std::lock_guard<std::mutex> lock(log_mutex);
      log << config.algorithm << " seed " << seed << ": " << to_string(traces[i].status) << ", "
          << traces[i].records.size() << " iterations, incumbent " << traces[i].y_opt << ", violations "
          << traces[i].violations() << '\n';
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(worker_count(), static_cast<unsigned>(config.seeds.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::ofstream summary(dir / ("summary_" + config.algorithm + ".csv"));
  write_summary_csv(summarize(traces), summary);

  int status = kExitOk;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (failures[i].empty()) continue;
    log << "seed " << config.seeds[i] << " failed: " << failures[i] << '\n';
    status = kExitRuntime;
  }
  return status;
}

}  // namespace mtsafe::cli
