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

#include <optional>
#include <string>
#include <vector>

#include "dspc/adaptation.hpp"
#include "dspc/plants.hpp"
#include "dspc/policy.hpp"

namespace dspc {

struct PlantConfig {
  std::string type = "cartpole";  // cartpole | replay
  CartPoleParams cartpole;
  Integrator integrator = Integrator::kRk4;
  DisturbanceModel disturbance;
  Vec x0;                  // initial plant state
  std::string replay_csv;  // replay source (identification-only workflows)
};

struct ExcitationConfig {
  std::string mode = "pd";  // pd | open_loop
  double amplitude = 4.0;   // multisine amplitude
  double dither = 1.5;      // uniform dither half-width
  int harmonics = 5;
  // Stabilizing state-feedback gains used while exciting (pd mode), applied
  // as F -= kp_th*theta + kd_th*theta_dot + kp_z*z + kd_z*z_dot. Defaults
  // hold the benchmark pendulum upright (note the negative cart-position
  // gains: the plant is non-minimum phase).
  double kp_theta = 229.4;
  double kd_theta = 98.8;
  double kp_z = -5.4;
  double kd_z = -25.6;
  Vec start_lo, start_hi;  // episode initial-state box (plant state)
};

struct IdentifierConfig {
  StfHyperParams hyper;  // n_u/n_y filled from the plant at load time
  EvolveConfig evolve;
  LearningConfig learning;
  int stack_capacity_factor = 2;
  int replace_cadence = 10;
  int epochs = 2;
  int samples = 5000;
  int episode_len = 40;
  double train_fraction = 0.8;
  double bfr_floor = 90.0;
  ExcitationConfig excitation;
};

struct BarrierConfig {
  std::string type = "abs_box";  // abs_box | halfspace | norm_ball | none
  int output_coord = 0;
  double bound = 5.0;
  double center = 0.0;
  bool upper = true;
  double radius = 0.5;
  double eta = 1.0;
};

struct NmpcConfig {
  int horizon = 4;
  std::string model = "identified";  // identified | exact
  Vec q_diag, r_diag, p_out_diag, q_n_diag, p_n_diag;  // sized at build time
  double p_gamma = 1.0;
  Vec u_min, u_max;
  double gamma_min = 1e-3;
  int max_iter = 50;
  double kkt_tol = 1e-6;
};

struct PolicyConfig {
  int l_max = 20;
  double create_threshold = 8.0;
  EvolveConfig evolve;
  LearningConfig learning;
  int stack_capacity_factor = 2;
  int replace_cadence = 25;
  int epochs = 1;
  int n_rollouts = 60;
  int rollout_steps = 40;
  double validation_fraction = 0.2;
  double truncate_at_bfr = -1.0;
  std::vector<Vec> reference_candidates;
  // Scenario box for the model-state part. Used directly for plant-state
  // models; for the stacked-state model the box is tiled from the output and
  // input boxes instead.
  Vec scenario_state_lo, scenario_state_hi;
  Vec scenario_output_lo, scenario_output_hi;
  Vec scenario_input_lo, scenario_input_hi;
  double epsilon = 0.01;
  double kappa = 0.01;
  int t_sim = 300;
  double convergence_tol = 0.05;
};

struct ReferenceSpec {
  Vec value;         // output-space setpoint
  Vec step_to;       // optional second setpoint
  int step_at = -1;  // step time; < 0 means constant reference

  Vec at(int k) const {
    return (step_at >= 0 && k >= step_at && step_to.size() > 0) ? step_to
                                                                : value;
  }
};

struct SimulateConfig {
  int steps = 300;
  ReferenceSpec reference;
  bool strict = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  PlantConfig plant;
  IdentifierConfig identifier;
  NmpcConfig nmpc;
  BarrierConfig barrier;
  UncertaintyBounds bounds;
  bool eps_w_auto = false;  // derive eps_w from the disturbance box
  PolicyConfig policy;
  AdaptationConfig adaptation;
  SimulateConfig simulate;
};

/// Parses and schema-validates an experiment configuration. Any missing or
/// ill-typed field throws ConfigError naming the field.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

/// Builds the barrier bound to a model's output channels (the barrier reads
/// y = Cx, so one declaration serves both the plant and the model state).
std::optional<BarrierSpec> build_output_barrier(const BarrierConfig& config,
                                                const Mat& output_matrix);

}  // namespace dspc
