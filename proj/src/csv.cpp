// Copyright 2026 The DSPC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dspc/csv.hpp"

#include <cstdio>
#include <sstream>

namespace dspc {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header)
    : out_(path), columns_(header.size()), path_(path) {
  if (!out_) throw ConfigError("cannot open for writing: " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) out_ << ",";
    out_ << header[i];
  }
  out_ << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) {
    throw DimensionError(path_ + ": row has " + std::to_string(values.size()) +
                         " cells, header has " + std::to_string(columns_));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out_ << ",";
    out_ << format_full(values[i]);
  }
  out_ << "\n";
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Vec CsvTable::col(const std::string& name) const {
  const int idx = column(name);
  if (idx < 0) throw ConfigError("csv column not found: " + name);
  Vec v(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) v[r] = rows[r][idx];
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": malformed value '" + cell + "'");
      }
    }
    if (vals.size() != table.header.size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": column count mismatch");
    }
    table.rows.push_back(std::move(vals));
  }
  return table;
}

std::string csv_text_without_columns(const CsvTable& table,
                                     const std::vector<std::string>& drop) {
  std::vector<bool> keep(table.header.size(), true);
  for (const std::string& name : drop) {
    const int idx = table.column(name);
    if (idx >= 0) keep[idx] = false;
  }
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (!keep[i]) continue;
    if (!first) os << ",";
    os << table.header[i];
    first = false;
  }
  os << "\n";
  for (const auto& row : table.rows) {
    first = true;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!keep[i]) continue;
      if (!first) os << ",";
      os << format_full(row[i]);
      first = false;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace dspc
