// Copyright 2026 The pcflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Result tables. On disk:
//
//   # key=value          metadata block, one pair per line
//   col_a,col_b,...      column row
//   1,2.5,...            data rows; empty fields are allowed
//
// Fields never contain commas or newlines, so no quoting is needed.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pcflow/error.hpp"

namespace pcflow::bench {

struct CsvTable {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::string> meta(const std::string& key) const {
    for (const auto& [k, v] : metadata)
      if (k == key) return v;
    return std::nullopt;
  }

  /// Index of a column; throws when absent.
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw Error("csv: missing column '" + name + "'");
  }
};

/// Shortest round-trippable-enough decimal form used for every number we emit.
inline std::string format_number(double v, int precision = 10) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

inline void write_csv(std::ostream& out, const CsvTable& table) {
  for (const auto& [k, v] : table.metadata) out << "# " << k << '=' << v << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

inline std::string to_csv_string(const CsvTable& table) {
  std::ostringstream os;
  write_csv(os, table);
  return os.str();
}

/// Writes to `path` via a sibling temporary and a rename.
inline void write_csv_atomic(const std::string& path, const CsvTable& table) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp + "' for writing");
    write_csv(out, table);
    if (!out) throw Error("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool have_columns = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (have_columns) throw CsvParseError("metadata after the column row", lineno);
      std::string body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.erase(0, 1);
      const auto eq = body.find('=');
      if (eq == std::string::npos || eq == 0) throw CsvParseError("metadata line without key=value", lineno);
      table.metadata.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    auto fields = detail::split_fields(line);
    if (!have_columns) {
      for (const auto& f : fields)
        if (f.empty()) throw CsvParseError("empty column name", lineno);
      table.columns = std::move(fields);
      have_columns = true;
      continue;
    }
    if (fields.size() != table.columns.size())
      throw CsvParseError("expected " + std::to_string(table.columns.size()) + " fields, found " +
                              std::to_string(fields.size()),
                          lineno);
    table.rows.push_back(std::move(fields));
  }
  if (!have_columns) throw CsvParseError("no column row", lineno == 0 ? 1 : lineno);
  return table;
}

inline CsvTable parse_csv_string(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_csv(in);
}

/// Parses a numeric field; `line` is used for error reporting only.
inline double parse_number(const std::string& field, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw CsvParseError("malformed number '" + field + "'", line);
    return v;
  } catch (const std::invalid_argument&) {
    throw CsvParseError("malformed number '" + field + "'", line);
  } catch (const std::out_of_range&) {
    throw CsvParseError("number out of range '" + field + "'", line);
  }
}

/// 1-based file line of data row `index`, for error messages.
inline std::size_t data_line(const CsvTable& table, std::size_t index) {
  return table.metadata.size() + 2 + index;
}

}  // namespace pcflow::bench
