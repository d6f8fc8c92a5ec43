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

#include <functional>
#include <string>
#include <vector>

#include "dspc/common.hpp"

namespace dspc {

/// Scalar barrier h with safe set {x : h(x) <= 0}, its Lipschitz constant,
/// and a subgradient for use in constraint linearization.
struct BarrierSpec {
  std::function<double(const Vec&)> h;
  std::function<Vec(const Vec&)> grad;
  double eta = 1.0;
  std::string description;

  double value(const Vec& x) const { return h(x); }
};

/// Norm bounds on the disturbance, identification drift, and policy-learning
/// drift entering the robust margin.
struct UncertaintyBounds {
  double eps_w = 0.0;
  double eps_s = 0.0;
  double eps_c = 0.0;

  double total() const { return eps_w + eps_s + eps_c; }
  void validate() const;
};

/// Decay-condition residual h(x_k1) - (1 - gamma) h(x_k); <= 0 means the
/// exponential-decay safety condition holds at this transition.
double cbf_decay_check(const BarrierSpec& barrier, const Vec& x_k,
                       const Vec& x_k1, double gamma);

/// Robustified barrier value h_r(x) = h(x) + eta * (eps_w + eps_s + eps_c).
double rcbf_value(const BarrierSpec& barrier, const UncertaintyBounds& bounds,
                  const Vec& x_hat);

/// Robust decay residual
/// h(x_k1) - (1 - gamma) h(x_k) + gamma * eta * (sum of bounds); <= 0 means
/// the robustified constraint holds.
double rcbf_constraint_residual(const BarrierSpec& barrier,
                                const UncertaintyBounds& bounds,
                                const Vec& x_hat_k, const Vec& x_hat_k1,
                                double gamma);

struct LipschitzEstimate {
  double eta = 0.0;
  bool degenerate = false;  // constant function detected
};

/// Sampled Lipschitz estimate over an axis-aligned box, inflated by a safety
/// margin. A constant function yields eta 0 with the degenerate flag set.
LipschitzEstimate estimate_lipschitz(
    const std::function<double(const Vec&)>& h, const Vec& box_lo,
    const Vec& box_hi, int n_samples, std::uint64_t seed, double margin = 1.2);

// Built-in barrier shapes. All are 1-Lipschitz in their input vector (the
// norm-ball exactly, the coordinate forms via |x_c - c| <= ||x - x'||).

/// |x[coord] - center| - bound <= 0.
BarrierSpec make_abs_box_barrier(int coord, double bound, double center = 0.0);

/// One-sided x[coord] - hi <= 0 or lo - x[coord] <= 0 per sign convention.
BarrierSpec make_halfspace_barrier(int coord, double limit, bool upper);

/// ||x|| - radius <= 0.
BarrierSpec make_norm_ball_barrier(double radius);

/// max_i h_i(x); eta is the max of the parts' constants.
BarrierSpec compose_max(std::vector<BarrierSpec> parts);

/// Barrier evaluated on a linear image z = C x of the state (used to bind an
/// output-space barrier to a model's state). Valid when ||C||_2 <= 1, which
/// holds for the selector matrices used here; eta carries over unchanged.
BarrierSpec compose_with_linear(BarrierSpec inner, const Mat& c);

}  // namespace dspc
