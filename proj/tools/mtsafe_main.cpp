#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mtsafe/cli/config.hpp"
#include "mtsafe/cli/experiment.hpp"
#include "mtsafe/cli/fixtures.hpp"
#include "mtsafe/cli/verification.hpp"

namespace cli = mtsafe::cli;

namespace {

int print_report(const cli::SuiteReport& report) {
  for (const auto& p : report.properties)
    std::cout << (p.passed ? "PASS " : "FAIL ") << report.suite << ": " << p.name << " (" << p.detail << ")\n";
  std::cout << report.suite << ": " << (report.passed() ? "passed" : "FAILED") << " in " << report.seconds << " s\n";
  return report.passed() ? cli::kExitOk : cli::kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe multi-task Bayesian optimization experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds;
  auto* run = app.add_subcommand("run", "Run a configured experiment");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--seeds", seeds, "Seed list, e.g. 1-20 or 1,4,9 (overrides the config)");

  std::string suite;
  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("--suite", suite, "lemma1 | lemma2 | coverage | mcmc | h2 | all")->required();

  std::string fixture_out = "fixtures/laser_n2.json";
  int points_per_dim = 17;
  double p_disturb = 0.1;
  auto* fixture = app.add_subcommand("fixture-gen", "Regenerate the laser-chain fixture");
  fixture->add_option("--out", fixture_out, "Fixture path");
  fixture->add_option("--points-per-dim", points_per_dim, "Dense grid resolution");
  fixture->add_option("--p-disturb", p_disturb, "Relative filter disturbance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  try {
    if (*run) {
      cli::ExperimentConfig config = cli::load_config(config_path);
      if (!out_dir.empty()) config.output_dir = out_dir;
      if (!seeds.empty()) config.seeds = cli::parse_seed_list(seeds);
      return cli::run_experiment(config, std::cout);
    }
    if (*verify) {
      if (suite == "all") {
        int status = cli::kExitOk;
        for (const auto& name : cli::suite_names())
          if (print_report(cli::run_verification(name)) != cli::kExitOk) status = cli::kExitVerification;
        return status;
      }
      const auto& names = cli::suite_names();
      if (std::find(names.begin(), names.end(), suite) == names.end()) {
        std::cerr << "unknown suite '" << suite << "'\n";
        return cli::kExitUsage;
      }
      return print_report(cli::run_verification(suite));
    }
    if (*fixture) {
      mtsafe::LaserObjectiveOptions options;
      options.p_disturb = p_disturb;
      const cli::LaserFixture fx = cli::generate_laser_fixture(options, points_per_dim);
      std::filesystem::path path(fixture_out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      cli::write_fixture(fx, path);
      std::cout << "optimum f* = " << fx.optimum.value << " at " << fx.optimum.x.transpose() << "\n"
                << "hyperparams: signal variance " << fx.hyperparams.signal_variance << ", lengthscales "
                << fx.hyperparams.lengthscales.transpose() << "\nwrote " << path.string() << "\n";
      return fx.disturbed_stable ? cli::kExitOk : cli::kExitVerification;
    }
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitRuntime;
  }
  return cli::kExitUsage;
}
