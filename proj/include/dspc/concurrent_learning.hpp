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

#include <utility>
#include <vector>

#include "dspc/common.hpp"

namespace dspc {

/// Normalizes a packed regressor: m = sqrt(rho_offset + zeta'zeta),
/// zeta_bar = zeta / m, so ||zeta_bar|| < 1.
std::pair<Vec, double> normalize_regressor(const Vec& zeta, double rho_offset);

/// Memory of past regressor/output samples for the concurrent-learning law.
/// Stored entries keep (zeta, y, m); normalized views are derived.
class HistoryStack {
 public:
  struct Entry {
    Vec zeta;
    Vec y;
    double m = 1.0;
  };

  HistoryStack(int packed_dim, int capacity);

  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  int packed_dim() const { return packed_dim_; }
  bool full() const { return size() >= capacity_; }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Records a sample. Below capacity the sample is appended. At capacity the
  /// replacement maximizing lambda_min(H1) is applied; if no replacement
  /// improves lambda_min the sample is rejected. Returns true when stored.
  bool record(const Vec& zeta, const Vec& y, double m);

  /// Appends unconditionally (used while filling; no eigen checks).
  void push(const Vec& zeta, const Vec& y, double m);

  /// Grows the packed dimension after cluster creation: stored regressors
  /// gain zero entries for the new parameter block (their weights for the
  /// new cluster are treated as zero), which leaves each stored m intact.
  void grow_packed_dim(int new_dim, int new_capacity);

  /// H1 = sum_j zeta_bar_j zeta_bar_j'.
  Mat h1() const;

  double lambda_min_h1() const;

 private:
  int packed_dim_;
  int capacity_;
  std::vector<Entry> entries_;
};

/// True iff the stored normalized regressors span the packed parameter
/// space: numerical rank(Z) == q with SVD tolerance q * eps * sigma_max.
bool rank_condition(const HistoryStack& stack);

/// H1 from the stack and H2 = zeta_bar zeta_bar' + H1 for the current sample.
std::pair<Mat, Mat> h_matrices(const HistoryStack& stack,
                               const Vec& zeta_bar_current);

/// Stability bound on the learning rate: 2 lambda_min(H2) / lambda_max(H2)^2,
/// zero when H2 is singular or indefinite.
double max_learning_rate(const Mat& h2);

struct LearningConfig {
  double rho_offset = 1.0;  // offset inside the normalizing signal
  double rate = 0.1;        // fixed learning rate when auto_rate is off
  bool auto_rate = true;
  double safety_fraction = 0.5;  // fraction of the max rate under auto_rate

  void validate() const;
};

struct ParameterEstimate {
  Mat phi;  // n_y x q
  long step = 0;
};

struct ClUpdateInfo {
  double rate_used = 0.0;
  double lambda_min_h2 = 0.0;
  double frob_delta = 0.0;  // ||Phi_next - Phi||_F
};

/// One step of the discrete-time concurrent-learning law: the current-sample
/// error term plus the recomputed error of every stored sample, each weighted
/// by the learning rate. Errors are always evaluated with the current
/// parameter estimate; nothing is cached across steps.
ClUpdateInfo cl_update(ParameterEstimate& estimate, const Vec& zeta,
                       const Vec& y, const HistoryStack& stack,
                       const LearningConfig& config);

}  // namespace dspc
