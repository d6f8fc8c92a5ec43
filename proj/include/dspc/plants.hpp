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

#include <string>
#include <utility>
#include <vector>

#include "dspc/state_space.hpp"

namespace dspc {

/// Cart-inverted-pendulum parameters. State is [z, z_dot, theta, theta_dot]
/// with theta = 0 the upright pose; the input is the horizontal force on the
/// cart; outputs are [z, theta].
struct CartPoleParams {
  double m_cart = 5.0;    // kg
  double m_pend = 1.0;    // kg
  double length = 2.0;    // m
  double k_d = 10.0;      // N s/m
  double g = 9.81;        // m/s^2
  double t_sample = 0.1;  // s

  void validate() const;
};

/// Continuous-time accelerations (z_ddot, theta_ddot) at a state and force.
std::pair<double, double> cartpole_accels(const CartPoleParams& p,
                                          const Vec& state, double force);

enum class Integrator { kEuler, kRk4 };

/// Integrates the dynamics over one sampling period (force held constant),
/// then adds the additive disturbance w.
Vec cartpole_step(const CartPoleParams& p, const Vec& state, double force,
                  const Vec& w, Integrator integrator = Integrator::kRk4);

/// Total mechanical energy (used by integration-quality checks).
double cartpole_energy(const CartPoleParams& p, const Vec& state);

/// Additive state disturbance, uniform in a box. Samples are a pure function
/// of (seed, step index), so sequences are reproducible and random-access.
struct DisturbanceModel {
  enum class Kind { kNone, kUniformBox };
  Kind kind = Kind::kNone;
  Vec half_width;  // per state coordinate
  std::uint64_t seed = 0;

  void validate(int n) const;
};

Vec sample_disturbance(const DisturbanceModel& model, int n, long k);

/// The exact discrete cart-pole as a prediction model (linearization by
/// central finite differences). Used for pipelines that bypass
/// identification and control the known model directly.
class CartPoleModel : public PredictionModel {
 public:
  CartPoleModel(const CartPoleParams& params,
                Integrator integrator = Integrator::kRk4)
      : params_(params), integrator_(integrator) {
    params_.validate();
  }

  int state_dim() const override { return 4; }
  int input_dim() const override { return 1; }
  int output_dim() const override { return 2; }
  Vec step(const Vec& x, const Vec& u) const override;
  Mat output_matrix() const override;
  AffineStateMatrices linearize(const Vec& x, const Vec& u) const override;

  const CartPoleParams& params() const { return params_; }

 private:
  CartPoleParams params_;
  Integrator integrator_;
};

/// One recorded I/O episode: u[k], y[k] sampled at t = k * dt.
struct IoEpisode {
  std::vector<Vec> u;
  std::vector<Vec> y;
};

/// Writes/reads the I/O log schema `t,u_1..u_m,y_1..y_l`. The time column
/// restarts at zero on every episode boundary; the reader splits episodes at
/// those restarts. Parse errors carry the offending line number.
void write_io_csv(const std::string& path, const std::vector<IoEpisode>& eps,
                  int n_u, int n_y, double dt);
std::vector<IoEpisode> read_io_csv(const std::string& path, int n_u, int n_y);

/// Data-source plant backed by a recorded log: yields the stored (u, y)
/// pairs in order and has no dynamics of its own.
class ReplayPlant {
 public:
  ReplayPlant(std::string csv_path, int n_u, int n_y);

  /// Next recorded pair; false at end of data.
  bool next(Vec* u, Vec* y);
  void reset() { episode_ = 0; index_ = 0; }
  const std::vector<IoEpisode>& episodes() const { return episodes_; }

 private:
  std::vector<IoEpisode> episodes_;
  std::size_t episode_ = 0;
  std::size_t index_ = 0;
};

}  // namespace dspc
