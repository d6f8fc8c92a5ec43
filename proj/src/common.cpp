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

#include "dspc/common.hpp"

#include <algorithm>
#include <sstream>

namespace dspc {

Mat solve_spd(const Mat& m, const Mat& rhs, const char* what, double jitter) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": matrix not square");
  }
  Mat reg = m;
  reg.diagonal().array() += jitter;
  Eigen::LLT<Mat> llt(reg);
  if (llt.info() != Eigen::Success || !reg.allFinite()) {
    // Condition estimate from the eigenvalue range of the symmetric part.
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()),
                                          Eigen::EigenvaluesOnly);
    std::ostringstream os;
    os << what << ": SPD factorization failed";
    if (es.info() == Eigen::Success && es.eigenvalues().size() > 0) {
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().maxCoeff();
      os << " (eigenvalue range [" << lo << ", " << hi << "]";
      if (lo > 0.0) os << ", cond ~ " << hi / lo;
      os << ")";
    }
    throw NumericalError(os.str());
  }
  return llt.solve(rhs);
}

Vec clamp(const Vec& v, const Vec& lo, const Vec& hi) {
  if (lo.size() != v.size() || hi.size() != v.size()) {
    throw DimensionError("clamp: bound size mismatch");
  }
  return v.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace dspc
