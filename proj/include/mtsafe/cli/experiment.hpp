#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "mtsafe/cli/config.hpp"
#include "mtsafe/safebo.hpp"

namespace mtsafe::cli {

/// One seeded run of the configured algorithm.
Trace run_one(const ExperimentConfig& config, const Problem& problem, std::uint64_t seed);

/// Worker count: MTSAFE_WORKERS when set and positive, otherwise the
/// hardware concurrency.
unsigned worker_count();

/// Runs every seed on a worker pool; results are ordered like `seeds`.
std::vector<Trace> run_seeds(const ExperimentConfig& config, const Problem& problem,
                             const std::vector<std::uint64_t>& seeds, unsigned workers);

/// Runs the experiment and writes trace_<algorithm>_seed<k>.ndjson per seed
/// plus summary_<algorithm>.csv in the output directory. Returns an exit code.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

}  // namespace mtsafe::cli
