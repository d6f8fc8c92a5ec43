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

#include "dspc/common.hpp"

namespace dspc {

/// Dense convex QP  min 0.5 z'Hz + g'z  s.t.  Az <= b,  A_eq z = b_eq.
struct DenseQp {
  Mat h;
  Vec g;
  Mat a;
  Vec b;
  Mat a_eq;  // may be empty
  Vec b_eq;
};

enum class QpStatus { kSolved, kMaxIter, kInfeasible };

struct QpResult {
  Vec z;
  Vec lambda;  // multipliers of Az <= b
  Vec nu;      // multipliers of A_eq z = b_eq
  QpStatus status = QpStatus::kMaxIter;
  int iterations = 0;
  double primal_residual = 0.0;  // max violation at the returned point
};

struct QpSettings {
  int max_iter = 60;
  double tol = 1e-10;
};

/// Primal-dual interior-point solve (Mehrotra predictor-corrector). H must be
/// positive definite. Problem sizes here are tiny (tens of variables), so
/// everything is dense and factored directly.
QpResult solve_qp(const DenseQp& qp, const QpSettings& settings = {});

}  // namespace dspc
