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

#include "dspc/safety.hpp"

#include <cmath>

#include <doctest.h>

#include "dspc/rng.hpp"

using namespace dspc;

namespace {

// State-space barrier h(x) = |x_0| - 5 (cart-position box).
BarrierSpec position_box() { return make_abs_box_barrier(0, 5.0); }

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

TEST_CASE("cbf_decay_check boundary and satisfied cases") {
  // h carried through state vectors holding the barrier value directly.
  BarrierSpec ident = make_halfspace_barrier(0, 0.0, true);  // h(x) = x0
  const Vec hk = Vec::Constant(1, -1.0);
  CHECK(cbf_decay_check(ident, hk, Vec::Constant(1, -0.5), 0.5) ==
        doctest::Approx(0.0));
  CHECK(cbf_decay_check(ident, hk, Vec::Constant(1, -0.6), 0.5) ==
        doctest::Approx(-0.1));
  // gamma = 1 reduces to plain membership h(x_{k+1}) <= 0.
  CHECK(cbf_decay_check(ident, hk, Vec::Constant(1, -0.3), 1.0) ==
        doctest::Approx(-0.3));
  CHECK_THROWS_AS(cbf_decay_check(ident, hk, hk, 0.0), ArgumentError);
  CHECK_THROWS_AS(cbf_decay_check(ident, hk, hk, 1.5), ArgumentError);
}

TEST_CASE("rcbf_value arithmetic") {
  BarrierSpec b = position_box();
  UncertaintyBounds eps{0.01, 0.01, 0.01};
  // h = -2 at x0 = 3, eta = 1, margin 0.03.
  CHECK(rcbf_value(b, eps, vec2(3.0, 0.0)) == doctest::Approx(-1.97));
  UncertaintyBounds zero;
  CHECK(rcbf_value(b, zero, vec2(3.0, 0.0)) == doctest::Approx(-2.0));
}

TEST_CASE("rcbf robustness chain: h(x) <= h_r(x_hat) over the ball") {
  Rng rng(117);
  UncertaintyBounds eps{0.012, 0.007, 0.004};
  std::vector<BarrierSpec> barriers;
  barriers.push_back(make_abs_box_barrier(0, 5.0));
  barriers.push_back(make_norm_ball_barrier(0.5));
  barriers.push_back(compose_max(
      {make_halfspace_barrier(1, 2.0, true), make_abs_box_barrier(0, 1.0)}));
  for (const BarrierSpec& b : barriers) {
    for (int i = 0; i < 2000; ++i) {
      const Vec x_hat = 3.0 * rng.normal_vec(2);
      Vec d = rng.normal_vec(2);
      d *= rng.uniform01() * eps.total() / d.norm();
      const Vec x = x_hat + d;
      CHECK(b.h(x) <= rcbf_value(b, eps, x_hat));
    }
  }
}

TEST_CASE("rcbf_constraint_residual reductions and arithmetic") {
  BarrierSpec b = position_box();
  UncertaintyBounds zero;
  const Vec xk = vec2(2.0, 0.0), xk1 = vec2(2.5, 0.0);
  CHECK(rcbf_constraint_residual(b, zero, xk, xk1, 0.5) ==
        doctest::Approx(cbf_decay_check(b, xk, xk1, 0.5)));

  // gamma = 1: h(x_{k+1}) <= -eta * total.
  UncertaintyBounds eps{0.01, 0.01, 0.01};
  const double r1 = rcbf_constraint_residual(b, eps, xk, vec2(4.97, 0.0), 1.0);
  CHECK(r1 == doctest::Approx(0.0));

  // h(x_k) = -3, gamma = 0.5, margin 0.03: satisfied iff h(x_{k+1}) <= -1.515.
  const Vec x3 = vec2(2.0, 0.0);
  const double boundary =
      rcbf_constraint_residual(b, eps, x3, vec2(5.0 - 1.515, 0.0), 0.5);
  CHECK(boundary == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rcbf_constraint_residual(b, eps, x3, vec2(5.0 - 1.516, 0.0), 0.5) <
        0.0);
}

TEST_CASE("monotone robustification") {
  Rng rng(9);
  BarrierSpec b = make_norm_ball_barrier(1.0);
  for (int i = 0; i < 200; ++i) {
    const Vec x = rng.normal_vec(3);
    UncertaintyBounds small{0.01, 0.0, 0.02};
    UncertaintyBounds big{0.02, 0.01, 0.02};
    CHECK(rcbf_value(b, small, x) >= b.h(x));
    CHECK(rcbf_value(b, big, x) >= rcbf_value(b, small, x));
  }
}

TEST_CASE("forward invariance under a residual-feasible controller") {
  // Scalar system x+ = x + u with h(x) = x - 1; the controller saturates the
  // robust decay condition each step. Induction keeps h_r <= 0 throughout.
  BarrierSpec b = make_halfspace_barrier(0, 1.0, true);
  UncertaintyBounds eps{0.005, 0.003, 0.002};
  const double gamma = 0.4;
  Vec x = Vec::Constant(1, 0.2);
  REQUIRE(rcbf_value(b, eps, x) <= 0.0);
  for (int k = 0; k < 120; ++k) {
    // Largest next value allowed by the robust decay condition.
    const double h_next = (1.0 - gamma) * b.h(x) - gamma * b.eta * eps.total();
    const Vec x_next = Vec::Constant(1, h_next + 1.0);
    CHECK(rcbf_constraint_residual(b, eps, x, x_next, gamma) <=
          doctest::Approx(0.0));
    x = x_next;
    CHECK(rcbf_value(b, eps, x) <= 1e-12);
  }
  // The state settles at the robust margin below the true boundary.
  CHECK(b.h(x) == doctest::Approx(-b.eta * eps.total()).epsilon(1e-6));
}

TEST_CASE("estimate_lipschitz known slopes") {
  const Vec lo = Vec::Constant(3, -1.0), hi = Vec::Constant(3, 1.0);
  const LipschitzEstimate linear = estimate_lipschitz(
      [](const Vec& x) { return x[0]; }, lo, hi, 4000, 5);
  CHECK(linear.eta >= 1.0);
  CHECK(linear.eta <= 1.2001);
  CHECK_FALSE(linear.degenerate);

  const LipschitzEstimate flat = estimate_lipschitz(
      [](const Vec&) { return 3.0; }, lo, hi, 100, 5);
  CHECK(flat.eta == 0.0);
  CHECK(flat.degenerate);

  const LipschitzEstimate steep = estimate_lipschitz(
      [](const Vec& x) { return 2.0 * x.norm(); }, lo, hi, 4000, 5);
  CHECK(steep.eta >= 2.0);

  CHECK_THROWS_AS(
      estimate_lipschitz([](const Vec& x) { return x[0]; }, lo, lo, 100, 5),
      ArgumentError);
  CHECK_THROWS_AS(
      estimate_lipschitz([](const Vec& x) { return x[0]; }, lo, hi, 1, 5),
      ArgumentError);
}

TEST_CASE("compose_with_linear keeps values and chain-rules gradients") {
  Mat c = Mat::Zero(1, 3);
  c(0, 2) = 1.0;
  BarrierSpec b = compose_with_linear(make_abs_box_barrier(0, 2.0), c);
  const Vec x = (Vec(3) << 9.0, -4.0, 1.5).finished();
  CHECK(b.h(x) == doctest::Approx(-0.5));
  const Vec g = b.grad(x);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 1.0);
}
