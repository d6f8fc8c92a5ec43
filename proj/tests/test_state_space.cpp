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

#include <doctest.h>

#include "support.hpp"

using namespace dspc;

namespace {

Vec vec1(double a) { return Vec::Constant(1, a); }

}  // namespace

TEST_CASE("stack_state layout") {
  StfHyperParams h;
  h.d_u = 2;
  h.d_y = 1;
  const Vec x = stack_state({vec1(5)}, {vec1(7)}, h);
  REQUIRE(x.size() == 2);
  CHECK(x[0] == 5.0);
  CHECK(x[1] == 7.0);

  StfHyperParams h1;
  h1.d_u = 1;
  h1.d_y = 2;
  const Vec xo = stack_state({}, {vec1(1), vec1(2)}, h1);
  REQUIRE(xo.size() == 2);  // outputs only
  CHECK(xo[0] == 1.0);
  CHECK(xo[1] == 2.0);

  StfHyperParams h2;
  h2.d_u = 3;
  h2.d_y = 2;
  h2.n_u = 2;
  h2.n_y = 1;
  CHECK(stacked_state_dim(h2) == 2 * 2 + 1 * 2);
  CHECK_THROWS_AS(stack_state({}, {vec1(1)}, h2), DimensionError);
}

TEST_CASE("linearize_at: structural shift blocks are exact identities") {
  Rng rng(23);
  CompositeStfModel m = test::random_model(rng, 2, 1, 3, 2, 2);
  const StfHyperParams& h = m.hyper;
  const int n = stacked_state_dim(h);
  const Vec u = rng.normal_vec(h.n_u);
  const Vec x = rng.normal_vec(n);
  const AffineStateMatrices lin = linearize_at(m, u, x);

  REQUIRE(lin.a_t2.rows() == n);
  REQUIRE(lin.a_t1.cols() == h.n_u);
  // Input head slot comes only from a_t1.
  CHECK(lin.a_t1.topLeftCorner(h.n_u, h.n_u) ==
        Mat::Identity(h.n_u, h.n_u));
  CHECK(lin.a_t2.topRows(h.n_u).isZero(0.0));
  // tau_1: shifted input block.
  const int shift_u = h.n_u * (h.d_u - 2);
  CHECK(lin.a_t2.block(h.n_u, 0, shift_u, shift_u) ==
        Mat::Identity(shift_u, shift_u));
  CHECK(lin.a_t2.block(h.n_u, shift_u, shift_u, n - shift_u).isZero(0.0));
  // tau_2: shifted output block.
  const int n_in = h.n_u * (h.d_u - 1);
  const int shift_y = h.n_y * (h.d_y - 1);
  CHECK(lin.a_t2.bottomRows(shift_y).block(0, n_in, shift_y, shift_y) ==
        Mat::Identity(shift_y, shift_y));
  CHECK(lin.a_t2.bottomRows(shift_y).leftCols(n_in).isZero(0.0));
}

TEST_CASE("linearize_at: constant matrices for one local model") {
  Rng rng(29);
  CompositeStfModel m = test::random_model(rng, 1, 1, 2, 2, 1);
  const Vec u1 = vec1(0.3), u2 = vec1(-4.0);
  const Vec x1 = rng.normal_vec(3), x2 = rng.normal_vec(3);
  const AffineStateMatrices a = linearize_at(m, u1, x1);
  const AffineStateMatrices b = linearize_at(m, u2, x2);
  CHECK((a.a_t2 - b.a_t2).norm() <= 1e-14);
  CHECK((a.a_t1 - b.a_t1).norm() <= 1e-14);
  CHECK((a.b_t - b.b_t).norm() <= 1e-14);
}

TEST_CASE("linearize_at: zero model gives zero output row offset") {
  Rng rng(31);
  CompositeStfModel m = test::random_model(rng, 1, 1, 2, 1, 2, 0.0);
  for (auto& lm : m.locals) {
    lm.a.setZero();
    lm.b.setZero();
  }
  const AffineStateMatrices lin = linearize_at(m, vec1(1.0), rng.normal_vec(2));
  CHECK(lin.b_t.isZero(0.0));
}

TEST_CASE("one-step equivalence with the NARX recursion") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    CompositeStfModel m = test::random_model(rng, 1, 2, 2, 2, 3);
    const StfHyperParams& h = m.hyper;
    // Histories newest-first: u(k-1); y(k), y(k-1).
    const Vec u_prev = rng.normal_vec(1);
    const Vec y_now = rng.normal_vec(2), y_prev = rng.normal_vec(2);
    const Vec x = stack_state({u_prev}, {y_now, y_prev}, h);
    const Vec u_now = rng.normal_vec(1);

    const AffineStateMatrices lin = linearize_at(m, u_now, x);
    const Vec x_next = lin.a_t2 * x + lin.a_t1 * u_now + lin.b_t;

    const Vec u_stf = build_regressor({u_now, u_prev}, {y_now, y_prev}, h);
    const Vec y_next = predict_raw(m, u_stf);
    const Vec expected = stack_state({u_now}, {y_next, y_now}, h);
    CHECK((x_next - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("rollout: trivial and linear closed forms") {
  Rng rng(41);
  CompositeStfModel m = test::random_model(rng, 1, 1, 1, 1, 1);
  const Vec x0 = vec1(2.0);
  CHECK(rollout(m, x0, {}).size() == 1);

  // Single local model: x+ = a_y x + a_u u + b, matched against the scalar
  // recursion.
  const double a_u = m.locals[0].a(0, 0);
  const double a_y = m.locals[0].a(0, 1);
  const double b = m.locals[0].b[0];
  std::vector<Vec> u_seq;
  for (int k = 0; k < 8; ++k) u_seq.push_back(vec1(0.3 * k - 1.0));
  const std::vector<Vec> traj = rollout(m, x0, u_seq);
  double x = x0[0];
  for (int k = 0; k < 8; ++k) {
    x = a_y * x + a_u * u_seq[k][0] + b;
    CHECK(traj[k + 1][0] == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("rollout equals NARX simulation on random composite models") {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    CompositeStfModel m = test::random_model(rng, 1, 1, 2, 2, 3, 0.3);
    const StfHyperParams& h = m.hyper;
    const Vec u_prev = 0.3 * rng.normal_vec(1);
    const std::vector<Vec> y_hist = {0.3 * rng.normal_vec(1),
                                     0.3 * rng.normal_vec(1)};
    const Vec x0 = stack_state({u_prev}, y_hist, h);
    std::vector<Vec> u_seq;
    for (int k = 0; k < 20; ++k) u_seq.push_back(0.2 * rng.normal_vec(1));

    const std::vector<Vec> traj = rollout(m, x0, u_seq);
    const std::vector<Vec> narx =
        test::narx_simulate(m, {u_prev}, y_hist, u_seq);
    for (int k = 0; k < 20; ++k) {
      // y(k+1) sits at the head of the output block of x(k+1).
      const double y_from_state = traj[k + 1][h.n_u * (h.d_u - 1)];
      CHECK(std::abs(y_from_state - narx[k][0]) <= 1e-10);
    }
  }
}

TEST_CASE("StfStateSpace wraps the model with output selection") {
  Rng rng(47);
  auto m = std::make_shared<const CompositeStfModel>(
      test::random_model(rng, 1, 2, 2, 2, 2));
  StfStateSpace ss(m);
  CHECK(ss.state_dim() == stacked_state_dim(m->hyper));
  CHECK(ss.input_dim() == 1);
  CHECK(ss.output_dim() == 2);
  const Vec x = rng.normal_vec(ss.state_dim());
  const Vec u = rng.normal_vec(1);
  const Vec next = ss.step(x, u);
  const AffineStateMatrices lin = ss.linearize(x, u);
  CHECK((next - (lin.a_t2 * x + lin.a_t1 * u + lin.b_t)).norm() <= 1e-12);
  // y(k) block of the state.
  const Vec y = ss.output(x);
  CHECK(y[0] == x[1]);
  CHECK(y[1] == x[2]);
}
