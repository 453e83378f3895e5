#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "uvsdma/sim/stats.hpp"

namespace uvsdma::sim {

/// One named scalar result. Monte-Carlo metrics carry the standard error and
/// the number of samples behind them; empirical probabilities additionally
/// carry a Wilson 95% interval. Closed-form values carry none of those.
struct Metric {
  std::string name;
  double value = 0.0;
  std::optional<double> se;
  std::optional<std::int64_t> n;
  std::optional<WilsonInterval> wilson;
};

/// Rectangular result table. Cells are JSON scalars (number, string, or null
/// for not-applicable); every row has one cell per column.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::ordered_json>> rows;
};

/// Complete experiment output. Everything except `runtime` is a pure
/// function of the resolved config and seed; `runtime` holds wall-clock
/// facts (elapsed seconds, timing medians, thread count) and is excluded
/// from the byte-identity contract and from every CSV rendering.
struct Report {
  std::string kind;
  std::string name;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;       // resolved config echo
  std::vector<Metric> metrics;
  std::vector<Table> tables;
  std::string primary_table;           // table served when -o names a .csv file
  nlohmann::ordered_json runtime;      // wall-clock section, never in CSV
  /// Extra standalone JSON documents (file-name suffix, content), such as
  /// serialized pairwise detector tables. Deterministic like the tables.
  std::vector<std::pair<std::string, std::string>> artifacts;
};

/// Shortest text that reparses to the same double, capped at 17 significant
/// digits ("%.17g"); the rendering used for every CSV floating-point cell.
std::string format_double(double value);

/// Full JSON document: version, kind, name, seed, config, metrics, tables,
/// then the runtime section last.
std::string report_to_json_string(const Report& report);

/// Metrics as CSV with header metric,value,se,n,wilson_low,wilson_high.
std::string metrics_to_csv_string(const Report& report);

/// One table as CSV with a header row. Null cells render empty.
std::string table_to_csv_string(const Table& table);

/// Pointer to a table by name; null when absent.
const Table* find_table(const Report& report, const std::string& name);

/// Human-oriented one-screen summary of the metrics, tables and runtime
/// section, for standard output.
std::string summary_text(const Report& report);

}  // namespace uvsdma::sim
