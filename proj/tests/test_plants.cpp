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

#include "dspc/plants.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <doctest.h>

using namespace dspc;

namespace {

Vec state(double z, double zd, double th, double thd) {
  return (Vec(4) << z, zd, th, thd).finished();
}

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("cartpole accelerations: hand-evaluated points") {
  CartPoleParams p;
  {
    const auto [zdd, thdd] = cartpole_accels(p, state(0, 0, 0, 0), 0.0);
    CHECK(zdd == doctest::Approx(0.0));
    CHECK(thdd == doctest::Approx(0.0));
  }
  {
    // F = 5 at rest: zdd = 5 / m_cart = 1, thdd = zdd / L = 0.5.
    const auto [zdd, thdd] = cartpole_accels(p, state(0, 0, 0, 0), 5.0);
    CHECK(zdd == doctest::Approx(1.0));
    CHECK(thdd == doctest::Approx(0.5));
  }
  {
    // Horizontal pendulum: cos = 0 so zdd = 0, thdd = g / L.
    const auto [zdd, thdd] =
        cartpole_accels(p, state(0, 0, 1.5707963267948966, 0), 0.0);
    CHECK(zdd == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(thdd == doctest::Approx(9.81 / 2.0));
  }
}

TEST_CASE("upright equilibrium is a fixed point of both integrators") {
  CartPoleParams p;
  const Vec x0 = state(0, 0, 0, 0);
  const Vec w = Vec::Zero(4);
  CHECK(cartpole_step(p, x0, 0.0, w, Integrator::kEuler).isZero(0.0));
  CHECK(cartpole_step(p, x0, 0.0, w, Integrator::kRk4).isZero(0.0));
}

TEST_CASE("disturbance is added after integration") {
  CartPoleParams p;
  const Vec w = (Vec(4) << 0.01, -0.01, 0.01, -0.01).finished();
  const Vec with = cartpole_step(p, state(0, 0, 0, 0), 0.0, w);
  CHECK((with - w).norm() == doctest::Approx(0.0));
}

TEST_CASE("euler approaches the rk4 reference at first order") {
  CartPoleParams p;
  const Vec x0 = state(0.3, -0.1, 0.25, 0.2);
  const double force = 2.0;

  // Reference: rk4 with 100 substeps over one nominal period.
  CartPoleParams fine = p;
  fine.t_sample = p.t_sample / 100.0;
  Vec x_ref = x0;
  for (int i = 0; i < 100; ++i) {
    x_ref = cartpole_step(fine, x_ref, force, Vec::Zero(4), Integrator::kRk4);
  }

  auto euler_error = [&](int substeps) {
    CartPoleParams pp = p;
    pp.t_sample = p.t_sample / substeps;
    Vec x = x0;
    for (int i = 0; i < substeps; ++i) {
      x = cartpole_step(pp, x, force, Vec::Zero(4), Integrator::kEuler);
    }
    return (x - x_ref).norm();
  };
  const double e1 = euler_error(1);
  const double e10 = euler_error(10);
  CHECK(e10 < e1);
  // First-order method: tenfold step refinement cuts the error ~10x.
  CHECK(e1 / e10 > 5.0);
  CHECK(e1 / e10 < 20.0);

  const Vec rk4_once = cartpole_step(p, x0, force, Vec::Zero(4));
  CHECK((rk4_once - x_ref).norm() < e10);
}

TEST_CASE("undamped unforced energy is conserved under rk4") {
  // The free pendulum falls and swings at several rad/s, so the quality
  // check integrates at 50 Hz over the full 10 s.
  CartPoleParams p;
  p.k_d = 0.0;
  p.t_sample = 0.02;
  const Vec x0 = state(0.0, 0.2, 0.4, 0.0);
  const double e0 = cartpole_energy(p, x0);
  Vec x = x0;
  double max_drift = 0.0;
  for (int k = 0; k < 500; ++k) {
    x = cartpole_step(p, x, 0.0, Vec::Zero(4));
    max_drift = std::max(max_drift,
                         std::abs(cartpole_energy(p, x) - e0) / std::abs(e0));
  }
  CHECK(max_drift <= 1e-5);
}

TEST_CASE("disturbance sampling: box bound and determinism") {
  DisturbanceModel none;
  CHECK(sample_disturbance(none, 4, 3).isZero(0.0));

  DisturbanceModel model;
  model.kind = DisturbanceModel::Kind::kUniformBox;
  model.half_width = Vec::Constant(4, 0.01);
  model.seed = 99;
  for (long k = 0; k < 200; ++k) {
    const Vec w = sample_disturbance(model, 4, k);
    CHECK(w.lpNorm<Eigen::Infinity>() <= 0.01);
    CHECK((w - sample_disturbance(model, 4, k)).isZero(0.0));
  }
  // Assumption-style norm bound with eps_w = hw * sqrt(n).
  for (long k = 0; k < 200; ++k) {
    CHECK(sample_disturbance(model, 4, k).norm() <= 0.01 * 2.0);
  }

  DisturbanceModel zero = model;
  zero.half_width = Vec::Zero(4);
  CHECK(sample_disturbance(zero, 4, 5).isZero(0.0));
}

TEST_CASE("exact model linearization is affine-exact at the point") {
  CartPoleParams p;
  CartPoleModel model(p);
  const Vec x = state(0.4, -0.2, 0.15, 0.1);
  const Vec u = Vec::Constant(1, 1.5);
  const AffineStateMatrices lin = model.linearize(x, u);
  const Vec via_affine = lin.a_t2 * x + lin.a_t1 * u + lin.b_t;
  CHECK((via_affine - model.step(x, u)).norm() <= 1e-12);
  CHECK(model.output(x)[0] == x[0]);
  CHECK(model.output(x)[1] == x[2]);
}

TEST_CASE("io csv round trip and replay") {
  const std::string path = temp_file("dspc_io_test.csv");
  std::vector<IoEpisode> eps(2);
  for (int e = 0; e < 2; ++e) {
    for (int k = 0; k < 3; ++k) {
      eps[e].u.push_back(Vec::Constant(1, e + 0.1 * k));
      eps[e].y.push_back((Vec(2) << k, -k).finished());
    }
  }
  write_io_csv(path, eps, 1, 2, 0.1);
  const std::vector<IoEpisode> back = read_io_csv(path, 1, 2);
  REQUIRE(back.size() == 2);
  for (int e = 0; e < 2; ++e) {
    REQUIRE(back[e].u.size() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK((back[e].u[k] - eps[e].u[k]).norm() == 0.0);
      CHECK((back[e].y[k] - eps[e].y[k]).norm() == 0.0);
    }
  }

  ReplayPlant replay(path, 1, 2);
  Vec u, y;
  int count = 0;
  while (replay.next(&u, &y)) ++count;
  CHECK(count == 6);
}

TEST_CASE("malformed io csv rows name the line") {
  const std::string path = temp_file("dspc_io_bad.csv");
  {
    std::ofstream out(path);
    out << "t,u_1,y_1,y_2\n";
    out << "0,1,2,3\n";
    out << "0.1,oops,2,3\n";
  }
  CHECK_THROWS_WITH_AS(read_io_csv(path, 1, 2), doctest::Contains(":3:"),
                       ConfigError);
  {
    std::ofstream out(path);
    out << "t,u_1,wrong\n";
  }
  CHECK_THROWS_AS(read_io_csv(path, 1, 2), ConfigError);
}
