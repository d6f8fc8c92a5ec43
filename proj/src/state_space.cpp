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

#include "dspc/state_space.hpp"

#include <string>
#include <utility>

namespace dspc {

Vec PredictionModel::output(const Vec& x) const { return output_matrix() * x; }

Vec stack_state(const std::vector<Vec>& u_hist, const std::vector<Vec>& y_hist,
                const StfHyperParams& hyper) {
  hyper.validate();
  if (static_cast<int>(u_hist.size()) != hyper.d_u - 1) {
    throw DimensionError("stack_state: u_hist needs " +
                         std::to_string(hyper.d_u - 1) + " entries, got " +
                         std::to_string(u_hist.size()));
  }
  if (static_cast<int>(y_hist.size()) != hyper.d_y) {
    throw DimensionError("stack_state: y_hist needs " +
                         std::to_string(hyper.d_y) + " entries, got " +
                         std::to_string(y_hist.size()));
  }
  Vec x(stacked_state_dim(hyper));
  Eigen::Index at = 0;
  for (const Vec& u : u_hist) {
    require_dim(u, hyper.n_u, "stack_state input entry");
    x.segment(at, hyper.n_u) = u;
    at += hyper.n_u;
  }
  for (const Vec& y : y_hist) {
    require_dim(y, hyper.n_y, "stack_state output entry");
    x.segment(at, hyper.n_y) = y;
    at += hyper.n_y;
  }
  return x;
}

AffineStateMatrices linearize_at(const CompositeStfModel& model, const Vec& u,
                                 const Vec& x) {
  const StfHyperParams& h = model.hyper;
  const int nu = h.n_u;
  const int ny = h.n_y;
  const int n_in = nu * (h.d_u - 1);  // delayed-input block width
  const int n_out = ny * h.d_y;
  const int n = n_in + n_out;
  require_dim(u, nu, "linearize_at input");
  require_dim(x, n, "linearize_at state");

  // U_stf(k+1) = [u(k); x(k)] in raw units; weights are frozen here.
  Vec u_stf(nu + n);
  u_stf << u, x;
  const Vec alpha = interpolation_weights_raw(model, u_stf);

  // Blend the raw-frame locals, then split columns per the stacked layout.
  Mat a_blend = Mat::Zero(ny, nu + n);
  Vec b_blend = Vec::Zero(ny);
  for (int i = 0; i < model.cluster_count(); ++i) {
    const LocalLinearModel raw = model.raw_local(i);
    a_blend.noalias() += alpha[i] * raw.a;
    b_blend.noalias() += alpha[i] * raw.b;
  }
  const Mat a_i1 = a_blend.leftCols(nu);        // columns hitting u(k)
  const Mat rho1 = a_blend.middleCols(nu, n_in);  // delayed inputs
  const Mat rho2 = a_blend.rightCols(n_out);      // delayed outputs

  AffineStateMatrices out;
  out.a_t2 = Mat::Zero(n, n);
  out.a_t1 = Mat::Zero(n, nu);
  out.b_t = Vec::Zero(n);

  Eigen::Index row = 0;
  if (h.d_u >= 2) {
    // New head slot u(k), fed purely through a_t1.
    out.a_t1.block(row, 0, nu, nu) = Mat::Identity(nu, nu);
    row += nu;
    // Shift block tau_1 moving old inputs down one slot.
    const int shift = nu * (h.d_u - 2);
    if (shift > 0) {
      out.a_t2.block(row, 0, shift, shift) = Mat::Identity(shift, shift);
      row += shift;
    }
  }
  // Output prediction row y(k+1).
  out.a_t2.block(row, 0, ny, n_in) = rho1;
  out.a_t2.block(row, n_in, ny, n_out) = rho2;
  out.a_t1.block(row, 0, ny, nu) = a_i1;
  out.b_t.segment(row, ny) = b_blend;
  row += ny;
  // Shift block tau_2 moving old outputs down one slot.
  const int shift_y = ny * (h.d_y - 1);
  if (shift_y > 0) {
    out.a_t2.block(row, n_in, shift_y, shift_y) =
        Mat::Identity(shift_y, shift_y);
  }
  return out;
}

std::vector<Vec> rollout(const CompositeStfModel& model, const Vec& x0,
                         const std::vector<Vec>& u_seq,
                         const std::vector<Vec>* w_seq) {
  if (w_seq != nullptr && w_seq->size() != u_seq.size()) {
    throw DimensionError("rollout: disturbance sequence length mismatch");
  }
  std::vector<Vec> traj;
  traj.reserve(u_seq.size() + 1);
  traj.push_back(x0);
  Vec x = x0;
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    const AffineStateMatrices m = linearize_at(model, u_seq[k], x);
    x = m.a_t2 * x + m.a_t1 * u_seq[k] + m.b_t;
    if (w_seq != nullptr) x += (*w_seq)[k];
    if (!x.allFinite()) {
      throw NumericalError("rollout: non-finite state at step " +
                           std::to_string(k + 1));
    }
    traj.push_back(x);
  }
  return traj;
}

StfStateSpace::StfStateSpace(std::shared_ptr<const CompositeStfModel> model)
    : model_(std::move(model)) {
  if (!model_) throw ArgumentError("StfStateSpace: null model");
  if (model_->input_dim != model_->hyper.regressor_dim()) {
    throw ArgumentError(
        "StfStateSpace: model input layout is not the NARX regressor");
  }
}

Vec StfStateSpace::step(const Vec& x, const Vec& u) const {
  const AffineStateMatrices m = linearize_at(*model_, u, x);
  return m.a_t2 * x + m.a_t1 * u + m.b_t;
}

Mat StfStateSpace::output_matrix() const {
  const StfHyperParams& h = model_->hyper;
  const int n = stacked_state_dim(h);
  Mat c = Mat::Zero(h.n_y, n);
  c.block(0, h.n_u * (h.d_u - 1), h.n_y, h.n_y) =
      Mat::Identity(h.n_y, h.n_y);
  return c;
}

AffineStateMatrices StfStateSpace::linearize(const Vec& x, const Vec& u) const {
  return linearize_at(*model_, u, x);
}

}  // namespace dspc
