#pragma once

// Seeded property suites. Each suite reports pass/fail per property plus the
// measured statistics, so callers with stricter needs can check the numbers
// themselves.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtsafe/benchmarks.hpp"
#include "mtsafe/hyperposterior.hpp"

namespace mtsafe::cli {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<PropertyResult> properties;
  std::map<std::string, double> metrics;
  double seconds = 0.0;

  bool passed() const;
};

/// Variance domination over the confidence set.
struct Lemma1Options {
  int instances = 10;
  int probes = 50;
  int grid_points = 100;
  int max_per_task = 15;
  std::uint64_t seed = 1;
};
SuiteReport verify_lemma1(const Lemma1Options& options = {});

/// RKHS norm domination and agreement of the two norm formulas.
struct Lemma2Options {
  int instances = 100;
  double formula_tolerance = 1e-9;
  std::uint64_t seed = 2;
};
SuiteReport verify_lemma2(const Lemma2Options& options = {});

/// Uniform error bound coverage of the full pipeline against ground truth
/// drawn from the prior.
struct CoverageOptions {
  int trials = 200;
  int grid_points = 50;
  int per_task = 10;
  Eigen::Index tasks = 2;
  double eta = 1.0;
  double delta = 0.1;
  double rho = 0.05;
  double slack = 0.04;
  int mcmc_steps = 1200;
  int mcmc_burn_in = 400;
  int mcmc_thinning = 4;
  std::uint64_t seed = 3;
};
SuiteReport verify_coverage(const CoverageOptions& options = {});

/// Prior-only chain against the direct LKJ sampler (two-sample KS on the
/// off-diagonal).
struct McmcSuiteOptions {
  int samples = 5000;
  std::vector<double> etas{0.5, 1.0, 2.0};
  int burn_in = 2000;
  int thinning = 10;
  double ks_limit = 0.05;
  std::uint64_t seed = 4;
};
SuiteReport verify_mcmc(const McmcSuiteOptions& options = {});

/// Lyapunov-based H2 norm against closed forms and a time-domain oracle.
struct H2Options {
  int systems = 20;
  Eigen::Index states = 4;
  double tolerance = 1e-4;
  std::uint64_t seed = 5;
};
SuiteReport verify_h2(const H2Options& options = {});

/// Impulse-response energy by composite Simpson quadrature of
/// ||C exp(A t) B||_F^2, independent of any Lyapunov solve.
double h2_norm_quadrature(const LtiSystem& sys, int steps = 20000);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Dispatches on lemma1 | lemma2 | coverage | mcmc | h2; throws
/// std::invalid_argument for any other name.
SuiteReport run_verification(const std::string& suite);

const std::vector<std::string>& suite_names();

}  // namespace mtsafe::cli
