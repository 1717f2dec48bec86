#include "mtsafe/cli/fixtures.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "mtsafe/random.hpp"

namespace mtsafe::cli {

namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vec(m.row(i).transpose()));
  return out;
}

Eigen::MatrixXd mat_from(const json& j) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), j.empty() ? 0 : static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = vec_from(j[i]).transpose();
  return m;
}

json filter_json(const FirstOrderFilter& f) { return json{{"a", f.a}, {"b", f.b}, {"c", f.c}}; }
FirstOrderFilter filter_from(const json& j) {
  return FirstOrderFilter{j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>()};
}

}  // namespace

LaserFixture generate_laser_fixture(const LaserObjectiveOptions& options, int points_per_dim,
                                    std::uint64_t calibration_seed) {
  LaserFixture fx;
  fx.options = options;
  fx.points_per_dim = points_per_dim;
  const BenchmarkObjective obj = make_laser_objective(options);
  fx.optimum = dense_grid_search(obj, points_per_dim);

  fx.disturbed_stable = true;
  for (std::size_t t = 1; t < obj.num_tasks; ++t) fx.disturbed_stable &= std::isfinite(obj.truth(fx.optimum.x, t));
  fx.nominal_at_optimum =
      build_laser_chain(options.n_lasers, fx.optimum.x, FilterPerturbation::identity(options.n_lasers + 1), options.model);

  fx.prior_mean = options.threshold;
  fx.observation_cap = 2.0 * options.threshold;
  Rng rng = make_stream(calibration_seed, "fixture.calibration");
  const Box& box = obj.domain;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MultiTaskDataset design(1, box);
  for (int i = 0; i < 150; ++i) {
    Eigen::VectorXd x(box.dim());
    for (Eigen::Index k = 0; k < box.dim(); ++k) x(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * unit(rng);
    design = add_observation(design, x, 0, std::min(obj.truth(x, 0), fx.observation_cap) - fx.prior_mean);
  }
  HyperparamGrid grid;
  grid.signal_variances = {25.0, 100.0, 225.0, 400.0};
  grid.noise_variances = {std::pow(obj.noise_std, 2)};
  for (double lp : {0.3, 0.6, 1.0})
    for (double li : {0.04, 0.08, 0.15}) {
      Eigen::VectorXd ls(box.dim());
      for (std::size_t l = 0; l < options.n_lasers; ++l) {
        ls(static_cast<Eigen::Index>(2 * l)) = lp;
        ls(static_cast<Eigen::Index>(2 * l + 1)) = li;
      }
      grid.lengthscales.push_back(ls);
    }
  fx.hyperparams = calibrate_hyperparams(design, CorrelationMatrix::identity(1), grid);
  return fx;
}

nlohmann::json to_json(const LaserFixture& fx) {
  const auto& o = fx.options;
  return json{{"n_lasers", o.n_lasers},
              {"p_disturb", o.p_disturb},
              {"disturbance_seeds", o.disturbance_seeds},
              {"threshold", o.threshold},
              {"model",
               {{"natural_frequency", o.model.natural_frequency},
                {"damping", o.model.damping},
                {"reference_filter", filter_json(o.model.reference_filter)},
                {"laser_filter", filter_json(o.model.laser_filter)}}},
              {"points_per_dim", fx.points_per_dim},
              {"optimum", {{"x", vec(fx.optimum.x)}, {"value", fx.optimum.value}}},
              {"hyperparams",
               {{"signal_variance", fx.hyperparams.signal_variance},
                {"lengthscales", vec(fx.hyperparams.lengthscales)},
                {"noise_variance", fx.hyperparams.noise_variance}}},
              {"prior_mean", fx.prior_mean},
              {"observation_cap", fx.observation_cap},
              {"disturbed_stable", fx.disturbed_stable},
              {"nominal_at_optimum",
               {{"A", mat(fx.nominal_at_optimum.A)},
                {"B", mat(fx.nominal_at_optimum.B)},
                {"C", mat(fx.nominal_at_optimum.C)},
                {"D", mat(fx.nominal_at_optimum.D)}}}};
}

LaserFixture laser_fixture_from_json(const nlohmann::json& j) {
  LaserFixture fx;
  auto& o = fx.options;
  o.n_lasers = j.at("n_lasers").get<std::size_t>();
  o.p_disturb = j.at("p_disturb").get<double>();
  o.disturbance_seeds = j.at("disturbance_seeds").get<std::array<std::uint64_t, 2>>();
  o.threshold = j.at("threshold").get<double>();
  const json& m = j.at("model");
  o.model.natural_frequency = m.at("natural_frequency").get<double>();
  o.model.damping = m.at("damping").get<double>();
  o.model.reference_filter = filter_from(m.at("reference_filter"));
  o.model.laser_filter = filter_from(m.at("laser_filter"));
  fx.points_per_dim = j.at("points_per_dim").get<int>();
  fx.optimum = KnownOptimum{vec_from(j.at("optimum").at("x")), j.at("optimum").at("value").get<double>()};
  const json& h = j.at("hyperparams");
  fx.hyperparams.signal_variance = h.at("signal_variance").get<double>();
  fx.hyperparams.lengthscales = vec_from(h.at("lengthscales"));
  fx.hyperparams.noise_variance = h.at("noise_variance").get<double>();
  fx.prior_mean = j.at("prior_mean").get<double>();
  fx.observation_cap = j.at("observation_cap").get<double>();
  fx.disturbed_stable = j.at("disturbed_stable").get<bool>();
  const json& s = j.at("nominal_at_optimum");
  fx.nominal_at_optimum = LtiSystem{mat_from(s.at("A")), mat_from(s.at("B")), mat_from(s.at("C")), mat_from(s.at("D"))};
  return fx;
}

void write_fixture(const LaserFixture& fixture, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(fixture).dump(2) << '\n';
}

LaserFixture read_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return laser_fixture_from_json(nlohmann::json::parse(in));
}

}  // namespace mtsafe::cli
