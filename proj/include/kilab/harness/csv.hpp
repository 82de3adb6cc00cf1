#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kilab/errors.hpp"

namespace kilab::csv {

/// Round-trip decimal text; "inf"/"-inf"/"nan" for non-finite values.
inline std::string format_double(double value, int digits = 17) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*g", digits, value);
  return buffer;
}

inline std::string format_optional(const std::optional<double>& value, int digits = 17) {
  return value ? format_double(*value, digits) : std::string();
}

/// Commas, quotes and newlines are replaced so fields never need quoting.
inline std::string sanitize(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
    if (c == '"') c = '\'';
  }
  return text;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  return line;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Header-addressed table of string cells.
class Table {
 public:
  static Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open CSV file '" + path + "'");
    Table table;
    std::string line;
    if (!std::getline(in, line)) throw UsageError("CSV file '" + path + "' is empty");
    table.header_ = split(strip(line));
    for (std::size_t i = 0; i < table.header_.size(); ++i) table.index_[table.header_[i]] = i;
    while (std::getline(in, line)) {
      line = strip(line);
      if (line.empty()) continue;
      auto row = split(line);
      row.resize(table.header_.size());
      table.rows_.push_back(std::move(row));
    }
    return table;
  }

  [[nodiscard]] bool has_column(const std::string& name) const { return index_.contains(name); }

  [[nodiscard]] std::size_t column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("CSV is missing column '" + name + "'");
    return it->second;
  }

  [[nodiscard]] const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  [[nodiscard]] const std::vector<std::string>& header() const { return header_; }

  static std::optional<double> parse_number(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) return std::nullopt;
      return v;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

 private:
  static std::string strip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
    return s;
  }

  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace kilab::csv
