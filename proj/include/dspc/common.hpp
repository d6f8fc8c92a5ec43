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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dspc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape/size violations; the message names the offending slot.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Failed factorizations, singular matrices, non-finite values.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

/// Invalid arguments outside their documented domain.
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

/// Malformed configuration or data files.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

inline void require_dim(const Vec& v, Eigen::Index n, const char* slot) {
  if (v.size() != n) {
    throw DimensionError(std::string(slot) + ": expected length " +
                         std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

inline void require_finite(const Vec& v, const char* slot) {
  if (!v.allFinite()) {
    throw NumericalError(std::string(slot) + ": non-finite entries");
  }
}

inline void require_finite(const Mat& m, const char* slot) {
  if (!m.allFinite()) {
    throw NumericalError(std::string(slot) + ": non-finite entries");
  }
}

/// Solves M x = rhs for symmetric positive-definite M, with a small jitter
/// added before factorization. Throws NumericalError (carrying a condition
/// estimate) when the regularized matrix still fails to factor.
Mat solve_spd(const Mat& m, const Mat& rhs, const char* what,
              double jitter = 1e-9);

/// Componentwise clamp of v into [lo, hi].
Vec clamp(const Vec& v, const Vec& lo, const Vec& hi);

}  // namespace dspc
