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

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "dspc/common.hpp"

namespace dspc {

/// CSV writer with full-precision (%.17g) float formatting, so equal values
/// always serialize to identical bytes.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::string path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
  Vec col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

/// Canonical text of a table with the named columns removed; used to compare
/// runs while ignoring wall-time columns.
std::string csv_text_without_columns(const CsvTable& table,
                                     const std::vector<std::string>& drop);

std::string format_full(double v);

}  // namespace dspc
