#include "uvsdma/sim/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "uvsdma/version.hpp"

namespace uvsdma::sim {
namespace {

/// CSV cell escaping: quote when the text contains a comma, quote or line
/// break, doubling embedded quotes.
std::string csv_escape(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (const char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_cell(const nlohmann::ordered_json& cell) {
  if (cell.is_null()) return "";
  if (cell.is_string()) return csv_escape(cell.get<std::string>());
  if (cell.is_boolean()) return cell.get<bool>() ? "true" : "false";
  if (cell.is_number_integer()) return std::to_string(cell.get<std::int64_t>());
  if (cell.is_number_unsigned()) return std::to_string(cell.get<std::uint64_t>());
  if (cell.is_number_float()) return format_double(cell.get<double>());
  return csv_escape(cell.dump());
}

nlohmann::ordered_json metric_to_json(const Metric& metric) {
  nlohmann::ordered_json row;
  row["name"] = metric.name;
  row["value"] = metric.value;
  if (metric.se) row["se"] = *metric.se;
  if (metric.n) row["n"] = *metric.n;
  if (metric.wilson) row["wilson"] = {metric.wilson->low, metric.wilson->high};
  return row;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string report_to_json_string(const Report& report) {
  nlohmann::ordered_json doc;
  doc["version"] = kVersion;
  doc["kind"] = report.kind;
  doc["name"] = report.name;
  doc["seed"] = report.seed;
  doc["config"] = report.config;
  doc["metrics"] = nlohmann::ordered_json::array();
  for (const Metric& metric : report.metrics) doc["metrics"].push_back(metric_to_json(metric));
  doc["tables"] = nlohmann::ordered_json::array();
  for (const Table& table : report.tables) {
    nlohmann::ordered_json entry;
    entry["name"] = table.name;
    entry["columns"] = table.columns;
    entry["rows"] = table.rows;
    doc["tables"].push_back(entry);
  }
  doc["runtime"] = report.runtime;
  return doc.dump(2) + "\n";
}

std::string metrics_to_csv_string(const Report& report) {
  std::string out = "metric,value,se,n,wilson_low,wilson_high\n";
  for (const Metric& metric : report.metrics) {
    out += csv_escape(metric.name);
    out += ',';
    out += format_double(metric.value);
    out += ',';
    if (metric.se) out += format_double(*metric.se);
    out += ',';
    if (metric.n) out += std::to_string(*metric.n);
    out += ',';
    if (metric.wilson) out += format_double(metric.wilson->low);
    out += ',';
    if (metric.wilson) out += format_double(metric.wilson->high);
    out += '\n';
  }
  return out;
}

std::string table_to_csv_string(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_escape(table.columns[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

const Table* find_table(const Report& report, const std::string& name) {
  for (const Table& table : report.tables) {
    if (table.name == name) return &table;
  }
  return nullptr;
}

std::string summary_text(const Report& report) {
  std::ostringstream out;
  out << report.kind << " \"" << report.name << "\" (seed " << report.seed << ")\n";
  if (!report.metrics.empty()) {
    out << "  metrics:\n";
    for (const Metric& metric : report.metrics) {
      char value[64];
      std::snprintf(value, sizeof value, "%.6g", metric.value);
      out << "    " << metric.name << " = " << value;
      if (metric.se) {
        char se[64];
        std::snprintf(se, sizeof se, "%.3g", *metric.se);
        out << " (se " << se;
        if (metric.n) out << ", n " << *metric.n;
        out << ")";
      } else if (metric.n) {
        out << " (n " << *metric.n << ")";
      }
      if (metric.wilson) {
        char low[64];
        char high[64];
        std::snprintf(low, sizeof low, "%.6g", metric.wilson->low);
        std::snprintf(high, sizeof high, "%.6g", metric.wilson->high);
        out << " [" << low << ", " << high << "]";
      }
      out << '\n';
    }
  }
  for (const Table& table : report.tables) {
    out << "  table " << table.name << ": " << table.rows.size() << " rows x "
        << table.columns.size() << " columns\n";
  }
  if (!report.runtime.is_null() && !report.runtime.empty()) {
    out << "  runtime: " << report.runtime.dump() << '\n';
  }
  return out.str();
}

}  // namespace uvsdma::sim
