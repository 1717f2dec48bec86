#pragma once

// Newline-delimited JSON traces: a header line, one line per iteration and a
// closing status line. Non-finite numbers are written as the strings "inf",
// "-inf" and "nan" so every value survives a round trip.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "mtsafe/safebo.hpp"

namespace mtsafe::cli {

void write_trace(const Trace& trace, std::ostream& out);
Trace read_trace(std::istream& in);

void write_trace_file(const Trace& trace, const std::filesystem::path& path);
Trace read_trace_file(const std::filesystem::path& path);

nlohmann::json record_to_json(const TraceRecord& record);
TraceRecord record_from_json(const nlohmann::json& j);

struct SummaryRow {
  int iteration = 0;
  int runs = 0;
  double mean_incumbent = 0.0;
  double std_incumbent = 0.0;
  double mean_incumbent_truth = 0.0;
  double std_incumbent_truth = 0.0;
};

/// Per-iteration mean and sample standard deviation of the incumbent across
/// runs. Iteration 0 is the incumbent of the initial seed; runs that stop
/// early carry their last incumbent forward.
std::vector<SummaryRow> summarize(const std::vector<Trace>& traces);

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);

}  // namespace mtsafe::cli
