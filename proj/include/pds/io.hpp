#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pds/types.hpp"

namespace pds {

struct CsvTable {
  std::vector<std::string> columns;
  Mat values;  // one row per data line, column order as in the header
};

namespace detail {

inline std::string trim_field(std::string s) {
  const auto is_space = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && is_space(static_cast<unsigned char>(s[b]))) ++b;
  return s.substr(b);
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim_field(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

// Header row plus numeric body. Malformed cells raise invalid_argument naming
// the row and column.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("read_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("read_csv: '" + path + "' is empty");
  CsvTable table;
  table.columns = detail::split_line(line);
  if (table.columns.empty()) throw std::invalid_argument("read_csv: header row is empty");

  std::vector<double> cells;
  Eigen::Index rows = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = detail::split_line(line);
    if (fields.size() != table.columns.size()) {
      throw std::invalid_argument("read_csv: row " + std::to_string(lineno) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(table.columns.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const auto* b = fields[c].data();
      const auto* e = b + fields[c].size();
      auto res = std::from_chars(b, e, v);
      if (res.ec != std::errc{} || res.ptr != e) {
        throw std::invalid_argument("read_csv: row " + std::to_string(lineno) + ", column '" +
                                    table.columns[c] + "': not a number: '" + fields[c] + "'");
      }
      cells.push_back(v);
    }
    ++rows;
  }
  table.values.resize(rows, static_cast<Eigen::Index>(table.columns.size()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      table.values(r, c) = cells[static_cast<std::size_t>(r * table.values.cols() + c)];
    }
  }
  return table;
}

// Outcome and treatment by column name; every remaining column is a control.
inline Dataset dataset_from_table(const CsvTable& table, const std::string& outcome,
                                  const std::string& treatment) {
  auto find_col = [&](const std::string& name) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (table.columns[c] == name) return static_cast<Eigen::Index>(c);
    }
    throw std::invalid_argument("dataset: column '" + name + "' not found");
  };
  const Eigen::Index yc = find_col(outcome);
  const Eigen::Index dc = find_col(treatment);
  if (yc == dc) throw std::invalid_argument("dataset: outcome and treatment name the same column");

  Dataset data;
  data.y = table.values.col(yc);
  data.d = table.values.col(dc);
  data.X.resize(table.values.rows(), table.values.cols() - 2);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    if (c == yc || c == dc) continue;
    data.X.col(k++) = table.values.col(c);
  }
  data.validate();
  return data;
}

}  // namespace pds
