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

#include "dspc/concurrent_learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dspc {

namespace {

double lambda_min_sym(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

std::pair<Vec, double> normalize_regressor(const Vec& zeta, double rho_offset) {
  if (!(rho_offset > 0.0)) {
    throw ArgumentError("normalize_regressor: rho_offset must be > 0");
  }
  const double m = std::sqrt(rho_offset + zeta.squaredNorm());
  return {zeta / m, m};
}

HistoryStack::HistoryStack(int packed_dim, int capacity)
    : packed_dim_(packed_dim), capacity_(capacity) {
  if (packed_dim < 1) throw ArgumentError("HistoryStack: packed_dim must be >= 1");
  if (capacity < packed_dim) {
    throw ArgumentError("HistoryStack: capacity must be >= packed_dim");
  }
}

void HistoryStack::push(const Vec& zeta, const Vec& y, double m) {
  require_dim(zeta, packed_dim_, "HistoryStack regressor");
  if (!(m > 0.0)) throw ArgumentError("HistoryStack: m must be > 0");
  entries_.push_back(Entry{zeta, y, m});
}

bool HistoryStack::record(const Vec& zeta, const Vec& y, double m) {
  require_dim(zeta, packed_dim_, "HistoryStack regressor");
  if (!(m > 0.0)) throw ArgumentError("HistoryStack: m must be > 0");
  if (!full()) {
    entries_.push_back(Entry{zeta, y, m});
    return true;
  }
  const Mat base = h1();
  const double current = lambda_min_sym(base);
  const Vec nb = zeta / m;
  const Mat add = nb * nb.transpose();
  int best = -1;
  double best_gain = current;
  for (int j = 0; j < size(); ++j) {
    const Vec old = entries_[j].zeta / entries_[j].m;
    const double cand = lambda_min_sym(base - old * old.transpose() + add);
    if (cand > best_gain + 1e-14) {
      best_gain = cand;
      best = j;
    }
  }
  if (best < 0) return false;
  entries_[best] = Entry{zeta, y, m};
  return true;
}

void HistoryStack::grow_packed_dim(int new_dim, int new_capacity) {
  if (new_dim < packed_dim_) {
    throw ArgumentError("HistoryStack: packed dimension cannot shrink");
  }
  for (Entry& e : entries_) {
    Vec z = Vec::Zero(new_dim);
    z.head(packed_dim_) = e.zeta;
    e.zeta = std::move(z);
  }
  packed_dim_ = new_dim;
  capacity_ = std::max(new_capacity, new_dim);
}

Mat HistoryStack::h1() const {
  Mat h = Mat::Zero(packed_dim_, packed_dim_);
  for (const Entry& e : entries_) {
    const Vec nb = e.zeta / e.m;
    h.noalias() += nb * nb.transpose();
  }
  return h;
}

double HistoryStack::lambda_min_h1() const { return lambda_min_sym(h1()); }

bool rank_condition(const HistoryStack& stack) {
  if (stack.size() < stack.packed_dim()) return false;
  Mat z(stack.packed_dim(), stack.size());
  for (int j = 0; j < stack.size(); ++j) {
    z.col(j) = stack.entries()[j].zeta / stack.entries()[j].m;
  }
  Eigen::JacobiSVD<Mat> svd(z);
  const Vec sv = svd.singularValues();
  if (sv.size() == 0) return false;
  const double tol = static_cast<double>(stack.packed_dim()) *
                     std::numeric_limits<double>::epsilon() * sv[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > tol) ++rank;
  }
  return rank == stack.packed_dim();
}

std::pair<Mat, Mat> h_matrices(const HistoryStack& stack,
                               const Vec& zeta_bar_current) {
  require_dim(zeta_bar_current, stack.packed_dim(), "h_matrices regressor");
  Mat h1 = stack.h1();
  Mat h2 = h1 + zeta_bar_current * zeta_bar_current.transpose();
  return {std::move(h1), std::move(h2)};
}

double max_learning_rate(const Mat& h2) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h2, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return 0.0;
  return 2.0 * lo / (hi * hi);
}

void LearningConfig::validate() const {
  if (!(rho_offset > 0.0)) throw ArgumentError("LearningConfig.rho_offset must be > 0");
  if (!auto_rate && !(rate > 0.0)) {
    throw ArgumentError("LearningConfig.rate must be > 0");
  }
  if (auto_rate && !(safety_fraction > 0.0 && safety_fraction < 1.0)) {
    throw ArgumentError("LearningConfig.safety_fraction must lie in (0,1)");
  }
}

ClUpdateInfo cl_update(ParameterEstimate& estimate, const Vec& zeta,
                       const Vec& y, const HistoryStack& stack,
                       const LearningConfig& config) {
  config.validate();
  const auto [zbar, m] = normalize_regressor(zeta, config.rho_offset);
  const auto [h1, h2] = h_matrices(stack, zbar);

  ClUpdateInfo info;
  Eigen::SelfAdjointEigenSolver<Mat> es(h2, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  info.lambda_min_h2 = lo;
  double r = config.rate;
  if (config.auto_rate) {
    if (!(lo > 0.0)) {
      throw NumericalError(
          "cl_update: auto rate requires the rank condition (H2 singular)");
    }
    r = config.safety_fraction * 2.0 * lo / (hi * hi);
  }
  info.rate_used = r;

  const Vec ebar = estimate.phi * zbar - y / m;
  if (!ebar.allFinite()) {
    throw NumericalError("cl_update: non-finite prediction error at step " +
                         std::to_string(estimate.step));
  }
  Mat delta = ebar * zbar.transpose();
  for (const HistoryStack::Entry& e : stack.entries()) {
    const Vec zj = e.zeta / e.m;
    const Vec ej = estimate.phi * zj - e.y / e.m;
    if (!ej.allFinite()) {
      throw NumericalError("cl_update: non-finite stacked error at step " +
                           std::to_string(estimate.step));
    }
    delta.noalias() += ej * zj.transpose();
  }
  estimate.phi -= r * delta;
  estimate.step += 1;
  info.frob_delta = r * delta.norm();
  return info;
}

}  // namespace dspc
