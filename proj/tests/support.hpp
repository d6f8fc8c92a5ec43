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

#include "dspc/rng.hpp"
#include "dspc/state_space.hpp"
#include "dspc/stf_model.hpp"

namespace dspc::test {

// Random positive-definite matrix I + 0.3 G G'.
inline Mat random_spd(Rng& rng, int n) {
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  return Mat::Identity(n, n) + 0.3 * g * g.transpose();
}

// Random composite model with identity normalizers. Centroids are spread so
// the weights vary meaningfully over the unit box.
inline CompositeStfModel random_model(Rng& rng, int n_u, int n_y, int d_u,
                                      int d_y, int l, double local_scale = 0.4) {
  StfHyperParams hyper;
  hyper.n_u = n_u;
  hyper.n_y = n_y;
  hyper.d_u = d_u;
  hyper.d_y = d_y;
  hyper.l_max = l;
  hyper.create_threshold = 1e9;  // fixed structure
  CompositeStfModel model = CompositeStfModel::create(hyper);
  const int n_in = model.input_dim;
  for (int i = 0; i < l; ++i) {
    Cluster c;
    c.centroid = 2.0 * rng.normal_vec(n_in + n_y);
    c.xi = random_spd(rng, n_in + n_y);
    c.lambda = Mat::Identity(n_y, n_y);
    c.sample_count = 1;
    model.clusters.push_back(std::move(c));
    LocalLinearModel lm;
    lm.a = Mat(n_y, n_in);
    for (int r = 0; r < n_y; ++r)
      for (int cidx = 0; cidx < n_in; ++cidx)
        lm.a(r, cidx) = local_scale * rng.normal();
    lm.b = local_scale * rng.normal_vec(n_y);
    model.locals.push_back(std::move(lm));
  }
  return model;
}

// NARX free-run oracle: repeated one-step prediction with explicit history
// bookkeeping, independent of the state-space path.
inline std::vector<Vec> narx_simulate(const CompositeStfModel& model,
                                      std::vector<Vec> u_hist,
                                      std::vector<Vec> y_hist,
                                      const std::vector<Vec>& u_future) {
  std::vector<Vec> outputs;
  for (const Vec& u_now : u_future) {
    std::vector<Vec> u_all;
    u_all.push_back(u_now);
    for (int i = 0; i + 1 < model.hyper.d_u; ++i) u_all.push_back(u_hist[i]);
    const Vec u_stf = build_regressor(u_all, y_hist, model.hyper);
    const Vec y_next = predict_raw(model, u_stf);
    outputs.push_back(y_next);
    if (model.hyper.d_u > 1) {
      u_hist.insert(u_hist.begin(), u_now);
      u_hist.pop_back();
    }
    y_hist.insert(y_hist.begin(), y_next);
    y_hist.pop_back();
  }
  return outputs;
}

// Linear time-invariant prediction model for solver and adaptation tests.
class LinearTestModel : public PredictionModel {
 public:
  LinearTestModel(Mat a, Mat b, Mat c, Vec offset = Vec())
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    offset_ = offset.size() ? offset : Vec::Zero(a_.rows());
  }

  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int input_dim() const override { return static_cast<int>(b_.cols()); }
  int output_dim() const override { return static_cast<int>(c_.rows()); }
  Vec step(const Vec& x, const Vec& u) const override {
    return a_ * x + b_ * u + offset_;
  }
  Mat output_matrix() const override { return c_; }
  AffineStateMatrices linearize(const Vec&, const Vec&) const override {
    return AffineStateMatrices{a_, b_, offset_};
  }

 private:
  Mat a_, b_, c_;
  Vec offset_;
};

}  // namespace dspc::test
