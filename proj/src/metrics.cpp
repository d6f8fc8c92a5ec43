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

#include "dspc/metrics.hpp"

#include <algorithm>

namespace dspc {

namespace {

double fit_percent(const Mat& target, const Mat& estimate, const char* what) {
  if (target.rows() != estimate.rows() || target.cols() != estimate.cols()) {
    throw DimensionError(std::string(what) + ": series shape mismatch");
  }
  if (target.rows() < 2) {
    throw ArgumentError(std::string(what) + ": need at least 2 samples");
  }
  Mat centered = target;
  centered.rowwise() -= target.colwise().mean();
  const double denom = centered.norm();
  if (denom <= 0.0) {
    throw ArgumentError(std::string(what) +
                        ": constant target series, metric undefined");
  }
  const double ratio = (target - estimate).norm() / denom;
  return std::max(0.0, (1.0 - ratio) * 100.0);
}

}  // namespace

double bfr_percent(const Mat& measured, const Mat& simulated) {
  return fit_percent(measured, simulated, "bfr");
}

double tracking_percent(const Mat& reference, const Mat& output) {
  return fit_percent(reference, output, "tracking");
}

}  // namespace dspc
