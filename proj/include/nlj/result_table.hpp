#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <tuple>
#include <vector>

#include "nlj/common.hpp"

namespace nlj {

// Shortest round-trip decimal rendering; identical bytes for identical
// doubles on every run, and from_chars recovers the exact value.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  double value = 0.0;
  const auto res =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw config_error("bad numeric field: '" + text + "'");
  return value;
}

struct ResultRow {
  std::string detector;
  double jnr_db = 0.0;
  double grid_spacing_deg = 0.0;
  std::string metric;
  double value = 0.0;
  long n_trials = 0;

  std::tuple<const std::string&, double, double, const std::string&> key()
      const {
    return {detector, jnr_db, grid_spacing_deg, metric};
  }
};

enum class OutputFormat { kCsv, kJson };

inline OutputFormat format_from_string(const std::string& name) {
  if (name == "csv") return OutputFormat::kCsv;
  if (name == "json") return OutputFormat::kJson;
  throw config_error("unknown output format: " + name);
}

// Keyed result set with stable ordering. Every (detector, jnr, spacing,
// metric) combination appears exactly once; add() rejects duplicates.
class ResultTable {
 public:
  static constexpr const char* kCsvHeader =
      "detector,jnr_db,grid_spacing_deg,metric,value,n_trials";

  void add(ResultRow row) {
    if (row.detector.empty() || row.metric.empty())
      throw std::invalid_argument("ResultTable: empty key field");
    for (const std::string* s : {&row.detector, &row.metric})
      if (s->find_first_of(",\"\n") != std::string::npos)
        throw std::invalid_argument("ResultTable: key contains delimiter");
    if (!std::isfinite(row.value))
      throw std::invalid_argument("ResultTable: non-finite value");
    if (row.n_trials < 0)
      throw std::invalid_argument("ResultTable: negative trial count");
    const auto pos = lower_bound(row);
    if (pos != rows_.end() && pos->key() == row.key())
      throw std::invalid_argument("ResultTable: duplicate key " +
                                  row.detector + "/" + row.metric);
    rows_.insert(pos, std::move(row));
  }

  void merge(const ResultTable& other) {
    for (const auto& row : other.rows_) add(row);
  }

  const std::vector<ResultRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  const ResultRow& at(const std::string& detector, double jnr_db,
                      double spacing, const std::string& metric) const {
    for (const auto& row : rows_)
      if (row.detector == detector && row.jnr_db == jnr_db &&
          row.grid_spacing_deg == spacing && row.metric == metric)
        return row;
    throw std::out_of_range("ResultTable: no row " + detector + "/" + metric);
  }

  void to_csv(std::ostream& os) const {
    os << kCsvHeader << '\n';
    for (const auto& row : rows_)
      os << row.detector << ',' << format_double(row.jnr_db) << ','
         << format_double(row.grid_spacing_deg) << ',' << row.metric << ','
         << format_double(row.value) << ',' << row.n_trials << '\n';
  }

  void to_json(std::ostream& os) const {
    os << "{\n  \"rows\": [";
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& row = rows_[i];
      os << (i == 0 ? "" : ",") << "\n    {\"detector\": \"" << row.detector
         << "\", \"jnr_db\": " << format_double(row.jnr_db)
         << ", \"grid_spacing_deg\": " << format_double(row.grid_spacing_deg)
         << ", \"metric\": \"" << row.metric
         << "\", \"value\": " << format_double(row.value)
         << ", \"n_trials\": " << row.n_trials << "}";
    }
    os << "\n  ]\n}\n";
  }

  static ResultTable from_csv(std::istream& is) {
    ResultTable table;
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader)
      throw config_error("ResultTable: bad CSV header");
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::string field;
      std::istringstream ls(line);
      while (std::getline(ls, field, ',')) fields.push_back(field);
      if (fields.size() != 6)
        throw config_error("ResultTable: bad CSV row: " + line);
      ResultRow row;
      row.detector = fields[0];
      row.jnr_db = parse_double(fields[1]);
      row.grid_spacing_deg = parse_double(fields[2]);
      row.metric = fields[3];
      row.value = parse_double(fields[4]);
      row.n_trials = std::stol(fields[5]);
      table.add(std::move(row));
    }
    return table;
  }

  bool operator==(const ResultTable& other) const {
    if (rows_.size() != other.rows_.size()) return false;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& a = rows_[i];
      const auto& b = other.rows_[i];
      if (a.detector != b.detector || a.jnr_db != b.jnr_db ||
          a.grid_spacing_deg != b.grid_spacing_deg || a.metric != b.metric ||
          a.value != b.value || a.n_trials != b.n_trials)
        return false;
    }
    return true;
  }

 private:
  std::vector<ResultRow>::iterator lower_bound(const ResultRow& row) {
    auto it = rows_.begin();
    while (it != rows_.end() && it->key() < row.key()) ++it;
    return it;
  }

  std::vector<ResultRow> rows_;
};

inline void emit_results(const ResultTable& table, const std::string& path,
                         OutputFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot open output path: " + path);
  if (format == OutputFormat::kCsv)
    table.to_csv(os);
  else
    table.to_json(os);
  os.flush();
  if (!os) throw config_error("write failed: " + path);
}

inline std::string render_results(const ResultTable& table,
                                  OutputFormat format) {
  std::ostringstream os;
  if (format == OutputFormat::kCsv)
    table.to_csv(os);
  else
    table.to_json(os);
  return os.str();
}

}  // namespace nlj
