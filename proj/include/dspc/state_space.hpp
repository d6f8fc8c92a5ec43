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

#include <memory>
#include <vector>

#include "dspc/common.hpp"
#include "dspc/stf_model.hpp"

namespace dspc {

/// Affine one-step dynamics x(k+1) = a_t2 x(k) + a_t1 u(k) + b_t evaluated at
/// a linearization point. For the composite model the blending weights are
/// frozen at that point, so the affine map reproduces the nonlinear step
/// exactly there.
struct AffineStateMatrices {
  Mat a_t2;  // state matrix
  Mat a_t1;  // input matrix
  Vec b_t;   // affine offset
};

/// One-step prediction model used by the optimal control and adaptation
/// layers. Implementations are pure and reentrant.
class PredictionModel {
 public:
  virtual ~PredictionModel() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  /// Nonlinear one-step map x(k+1) = f(x(k), u(k)).
  virtual Vec step(const Vec& x, const Vec& u) const = 0;
  /// y = C x; both shipped models have linear output maps.
  virtual Mat output_matrix() const = 0;
  virtual Vec output(const Vec& x) const;
  /// Affine dynamics at (x, u); exact at the evaluation point.
  virtual AffineStateMatrices linearize(const Vec& x, const Vec& u) const = 0;
};

/// Stacks I/O history into the model state
/// x(k) = [u(k-1); ...; u(k-d_u+1); y(k); ...; y(k-d_y+1)].
/// u_hist is passed newest-first starting at u(k-1) (d_u-1 entries; empty for
/// d_u = 1); y_hist newest-first starting at y(k) (d_y entries).
Vec stack_state(const std::vector<Vec>& u_hist_newest_first,
                const std::vector<Vec>& y_hist_newest_first,
                const StfHyperParams& hyper);

inline int stacked_state_dim(const StfHyperParams& hyper) {
  return hyper.n_u * (hyper.d_u - 1) + hyper.n_y * hyper.d_y;
}

/// The trained composite model in time-varying state-space form. Dynamics are
/// expressed in raw units (normalization folded into the local models).
class StfStateSpace : public PredictionModel {
 public:
  explicit StfStateSpace(std::shared_ptr<const CompositeStfModel> model);

  int state_dim() const override { return stacked_state_dim(model_->hyper); }
  int input_dim() const override { return model_->hyper.n_u; }
  int output_dim() const override { return model_->hyper.n_y; }
  Vec step(const Vec& x, const Vec& u) const override;
  Mat output_matrix() const override;
  AffineStateMatrices linearize(const Vec& x, const Vec& u) const override;

  const CompositeStfModel& model() const { return *model_; }

 private:
  std::shared_ptr<const CompositeStfModel> model_;
};

/// Builds the affine matrices of the stacked-state form at (u, x): weights
/// frozen at [u; x], local A split into its current-input block and the
/// remaining columns, shift identities filling the delay slots.
AffineStateMatrices linearize_at(const CompositeStfModel& model, const Vec& u,
                                 const Vec& x);

/// Iterates linearize_at + affine step over an input sequence, optionally
/// adding a per-step additive disturbance. Returns [x0, x1, ..., xN].
std::vector<Vec> rollout(const CompositeStfModel& model, const Vec& x0,
                         const std::vector<Vec>& u_seq,
                         const std::vector<Vec>* w_seq = nullptr);

}  // namespace dspc
