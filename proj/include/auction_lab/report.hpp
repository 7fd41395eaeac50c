#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "auction_lab/error.hpp"
#include "auction_lab/revenue.hpp"

namespace auction_lab {

/// One line of a report: an estimate, a ratio, or a bound check. `verdict` is
/// "pass", "fail", or empty when the row tests nothing.
struct ReportRow {
  std::string scenario_id;
  std::string mechanism;
  double mean = 0.0;
  double std_err = 0.0;
  std::uint64_t n_samples = 0;
  std::string method;
  std::string bound_tested;
  std::string verdict;

  bool operator==(const ReportRow&) const = default;
};

struct ExperimentReport {
  std::string scenario_id;
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;
  /// Wall-clock seconds; reported on stderr only so emitted bytes stay reproducible.
  double runtime_seconds = 0.0;

  void add_estimate(const std::string& mechanism, const RevenueEstimate& e) {
    rows.push_back({scenario_id, mechanism, e.mean, e.std_err, e.n_samples, std::string(to_string(e.method)), "", ""});
  }
  void add_check(const std::string& mechanism, double value, double std_err, std::uint64_t n, const std::string& method,
                 const std::string& bound, bool pass) {
    rows.push_back({scenario_id, mechanism, value, std_err, n, method, bound, pass ? "pass" : "fail"});
  }
  bool all_pass() const {
    return std::none_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.verdict == "fail"; });
  }
  std::size_t verdict_count() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.verdict.empty(); }));
  }
};

enum class ReportFormat { Csv, JsonLines, TextTable };

inline ReportFormat parse_format(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json-lines") return ReportFormat::JsonLines;
  if (s == "text-table") return ReportFormat::TextTable;
  throw Error(ErrorCode::InvalidParameter, "unknown format '" + std::string(s) + "'");
}

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{"scenario_id", "mechanism", "mean",         "std_err",
                                             "n_samples",   "method",    "bound_tested", "verdict"};
  return cols;
}

inline std::vector<std::string> row_cells(const ReportRow& r) {
  return {r.scenario_id,  r.mechanism, format_number(r.mean), format_number(r.std_err), std::to_string(r.n_samples),
          r.method,       r.bound_tested, r.verdict};
}

}  // namespace detail

inline std::string emit_csv(const ExperimentReport& report) {
  std::string out;
  const auto& cols = detail::report_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
  out += '\n';
  for (const auto& row : report.rows) {
    const auto cells = detail::row_cells(row);
    for (std::size_t c = 0; c < cells.size(); ++c) out += (c ? "," : "") + detail::csv_field(cells[c]);
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json row_to_json(const ReportRow& r) {
  nlohmann::ordered_json j;
  j["scenario_id"] = r.scenario_id;
  j["mechanism"] = r.mechanism;
  j["mean"] = r.mean;
  j["std_err"] = r.std_err;
  j["n_samples"] = r.n_samples;
  j["method"] = r.method;
  j["bound_tested"] = r.bound_tested;
  j["verdict"] = r.verdict;
  return j;
}

inline std::string emit_json_lines(const ExperimentReport& report) {
  std::string out;
  for (const auto& row : report.rows) out += row_to_json(row).dump() + '\n';
  return out;
}

/// Inverse of emit_json_lines.
inline std::vector<ReportRow> parse_json_lines(const std::string& text) {
  std::vector<ReportRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string path = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      ReportRow r;
      r.scenario_id = j.at("scenario_id").get<std::string>();
      r.mechanism = j.at("mechanism").get<std::string>();
      r.mean = j.at("mean").get<double>();
      r.std_err = j.at("std_err").get<double>();
      r.n_samples = j.at("n_samples").get<std::uint64_t>();
      r.method = j.at("method").get<std::string>();
      r.bound_tested = j.at("bound_tested").get<std::string>();
      r.verdict = j.at("verdict").get<std::string>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path, e.what());
    }
  }
  return rows;
}

inline std::string emit_text_table(const ExperimentReport& report) {
  const auto& cols = detail::report_columns();
  std::vector<std::vector<std::string>> table{cols};
  for (const auto& row : report.rows) table.push_back(detail::row_cells(row));
  std::vector<std::size_t> width(cols.size(), 0);
  for (const auto& r : table)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::string out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      std::string cell = table[i][c];
      if (c + 1 < cols.size()) cell.resize(width[c], ' ');
      line += (c ? "  " : "") + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < cols.size(); ++c) total += width[c] + (c ? 2 : 0);
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

inline std::string emit_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Csv: return emit_csv(report);
    case ReportFormat::JsonLines: return emit_json_lines(report);
    case ReportFormat::TextTable: return emit_text_table(report);
  }
  return {};
}

inline void write_text(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOFailure, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IOFailure, "write to '" + path + "' failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IOFailure, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace auction_lab
