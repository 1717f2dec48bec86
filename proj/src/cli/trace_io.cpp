#include "mtsafe/cli/trace_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mtsafe::cli {

namespace {

using nlohmann::json;

json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::runtime_error("trace: expected a number, got " + j.dump());
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i]);
  return v;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols)
      throw std::runtime_error("trace: ragged matrix");
    m.row(i) = vector_from(j[static_cast<std::size_t>(i)]).transpose();
  }
  return m;
}

json evaluation_json(const Evaluation& e) {
  return json{{"x", vector_json(e.x)}, {"task", e.task}, {"y", number(e.y)}, {"truth", number(e.truth)}};
}

Evaluation evaluation_from(const json& j) {
  return Evaluation{vector_from(j.at("x")), j.at("task").get<std::size_t>(), number(j.at("y")), number(j.at("truth"))};
}

}  // namespace

json record_to_json(const TraceRecord& r) {
  json supp = json::array();
  for (const auto& e : r.supplementary) supp.push_back(evaluation_json(e));
  return json{{"type", "iteration"},
              {"iteration", r.iteration},
              {"x", vector_json(r.x)},
              {"y", number(r.y)},
              {"truth", number(r.truth)},
              {"incumbent", number(r.incumbent)},
              {"incumbent_truth", number(r.incumbent_truth)},
              {"safe_set_size", r.safe_set_size},
              {"gamma_sq", number(r.gamma_sq)},
              {"lambda_sq", number(r.lambda_sq)},
              {"beta_bar", number(r.beta_bar)},
              {"acceptance_rate", number(r.acceptance_rate)},
              {"violation", r.violation},
              {"selected_mean", number(r.selected_mean)},
              {"selected_std", number(r.selected_std)},
              {"selected_ucb", number(r.selected_ucb)},
              {"sigma_lo", matrix_json(r.sigma_lo)},
              {"supplementary", supp}};
}

TraceRecord record_from_json(const json& j) {
  TraceRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.x = vector_from(j.at("x"));
  r.y = number(j.at("y"));
  r.truth = number(j.at("truth"));
  r.incumbent = number(j.at("incumbent"));
  r.incumbent_truth = number(j.at("incumbent_truth"));
  r.safe_set_size = j.at("safe_set_size").get<std::size_t>();
  r.gamma_sq = number(j.at("gamma_sq"));
  r.lambda_sq = number(j.at("lambda_sq"));
  r.beta_bar = number(j.at("beta_bar"));
  r.acceptance_rate = number(j.at("acceptance_rate"));
  r.violation = j.at("violation").get<bool>();
  r.selected_mean = number(j.at("selected_mean"));
  r.selected_std = number(j.at("selected_std"));
  r.selected_ucb = number(j.at("selected_ucb"));
  r.sigma_lo = matrix_from(j.at("sigma_lo"));
  for (const auto& e : j.at("supplementary")) r.supplementary.push_back(evaluation_from(e));
  return r;
}

void write_trace(const Trace& trace, std::ostream& out) {
  json initial = json::array();
  for (const auto& e : trace.initial) initial.push_back(evaluation_json(e));
  out << json{{"type", "header"},
              {"algorithm", trace.algorithm},
              {"seed", trace.seed},
              {"threshold", number(trace.threshold)},
              {"initial", initial}}
             .dump()
      << '\n';
  for (const auto& r : trace.records) out << record_to_json(r).dump() << '\n';
  out << json{{"type", "end"},
              {"status", to_string(trace.status)},
              {"message", trace.message},
              {"violations", trace.violations()},
              {"x_opt", vector_json(trace.x_opt)},
              {"y_opt", number(trace.y_opt)}}
             .dump()
      << '\n';
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  bool header = false, end = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      trace.algorithm = j.at("algorithm").get<std::string>();
      trace.seed = j.at("seed").get<std::uint64_t>();
      trace.threshold = number(j.at("threshold"));
      for (const auto& e : j.at("initial")) trace.initial.push_back(evaluation_from(e));
      header = true;
    } else if (type == "iteration") {
      trace.records.push_back(record_from_json(j));
    } else if (type == "end") {
      trace.status = run_status_from_string(j.at("status").get<std::string>());
      trace.message = j.at("message").get<std::string>();
      trace.x_opt = vector_from(j.at("x_opt"));
      trace.y_opt = number(j.at("y_opt"));
      end = true;
    } else {
      throw std::runtime_error("trace: unknown record type '" + type + "'");
    }
  }
  if (!header) throw std::runtime_error("trace: missing header record");
  if (!end) trace.status = RunStatus::Failed;
  return trace;
}

void write_trace_file(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trace(trace, out);
}

Trace read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_trace(in);
}

std::vector<SummaryRow> summarize(const std::vector<Trace>& traces) {
  std::vector<SummaryRow> rows;
  if (traces.empty()) return rows;
  std::size_t longest = 0;
  for (const auto& t : traces) longest = std::max(longest, t.records.size());

  auto initial_incumbent = [](const Trace& t) {
    const Evaluation* best = nullptr;
    for (const auto& e : t.initial)
      if (e.task == 0 && (!best || e.y < best->y)) best = &e;
    return best ? std::pair{best->y, best->truth}
                : std::pair{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  };

  const auto n = static_cast<double>(traces.size());
  for (std::size_t k = 0; k <= longest; ++k) {
    std::vector<double> inc, truth;
    for (const auto& t : traces) {
      std::pair<double, double> v = initial_incumbent(t);
      if (k > 0 && !t.records.empty()) {
        const auto& r = t.records[std::min(k, t.records.size()) - 1];
        v = {r.incumbent, r.incumbent_truth};
      }
      inc.push_back(v.first);
      truth.push_back(v.second);
    }
    auto stats = [n](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::pair{mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
    };
    const auto [mi, si] = stats(inc);
    const auto [mt, st] = stats(truth);
    rows.push_back(SummaryRow{static_cast<int>(k), static_cast<int>(traces.size()), mi, si, mt, st});
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "iteration,runs,mean_incumbent,std_incumbent,mean_incumbent_truth,std_incumbent_truth\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows)
    out << r.iteration << ',' << r.runs << ',' << r.mean_incumbent << ',' << r.std_incumbent << ','
        << r.mean_incumbent_truth << ',' << r.std_incumbent_truth << '\n';
}

}  // namespace mtsafe::cli
