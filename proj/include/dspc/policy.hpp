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

#include "dspc/nmpc.hpp"
#include "dspc/training.hpp"

namespace dspc {

/// Layout of the policy input z = [x; r(k); ...; r(k+N)].
struct PolicyInputLayout {
  int n_state = 0;
  int n_ref = 0;
  int horizon = 0;

  int dim() const { return n_state + (horizon + 1) * n_ref; }
};

/// Composite-model approximation of the receding-horizon control policy.
struct PolicyApproximator {
  CompositeStfModel stf;  // generic-feature composite model, output u
  PolicyInputLayout layout;
  Vec u_min, u_max;
  // Range of the state part across the training set; verification samples
  // initial states from this box.
  Vec train_state_lo, train_state_hi;
  double train_bfr = 0.0;  // validation fitting rate reached in training
};

/// Assembles the policy input from a state and a reference window (columns
/// r(k..k+N); shorter windows are extended by zero-order hold).
Vec policy_input(const PolicyInputLayout& layout, const Vec& x,
                 const std::vector<Vec>& ref_window);

/// Pure composite-model evaluation, clamped into the input box.
Vec evaluate_policy(const PolicyApproximator& policy, const Vec& x,
                    const std::vector<Vec>& ref_window);

struct PolicySample {
  Vec z;
  Vec u;
};

struct PolicyDataset {
  PolicyInputLayout layout;
  std::vector<PolicySample> samples;
  long dropped_infeasible = 0;
  long attempted = 0;
};

/// Everything needed to pose the per-step optimal control problem during
/// label generation (the model itself is passed separately).
struct OcpTemplate {
  int horizon = 4;
  Vec u_min, u_max;
  std::optional<BarrierSpec> barrier;
  UncertaintyBounds bounds;
  CostWeights weights;
};

/// Scenario distribution for dataset generation: initial model states are
/// sampled uniformly from a box; each rollout tracks a reference that steps
/// between two candidates at a random time, so the recorded reference
/// windows carry mixed values (a constant window would leave the policy
/// regressor rank-deficient in its reference block).
struct ScenarioSampler {
  Vec state_lo, state_hi;
  std::vector<Vec> reference_candidates;
  int rollout_steps = 40;

  /// Reference schedule of one rollout: start value, target value, and the
  /// jump step (possibly beyond the rollout, i.e. constant).
  struct Schedule {
    Vec start, target;
    int jump_at = 0;
    Vec at(int k) const { return k >= jump_at ? target : start; }
  };
};

/// Runs closed loops of the receding-horizon controller on the nominal model
/// and records (z, u*) pairs. Deterministic given the seed. Infeasible
/// solves are dropped and counted; more than 10% aborts.
PolicyDataset collect_dataset(const PredictionModel& nominal,
                              const NmpcSolver& solver,
                              const OcpTemplate& ocp,
                              const ScenarioSampler& scenarios, int n_rollouts,
                              std::uint64_t seed);

struct PolicyTrainOptions {
  int l_max = 20;
  double create_threshold = 8.0;
  EvolveConfig evolve;
  TrainOptions train;
  double validation_fraction = 0.2;
  // When set in (0, 100], training stops as soon as the validation fitting
  // rate reaches the target (used to produce deliberately coarse policies).
  double truncate_at_bfr = -1.0;
  // Input box the deployed policy clamps into (normally the control bounds
  // used during label generation).
  Vec u_min, u_max;
};

/// Trains the approximator on the dataset (chronological train/validation
/// split) and reports the validation fitting rate. Throws when the rank
/// condition is never achieved.
PolicyApproximator train_policy(const PolicyDataset& dataset,
                                const PolicyTrainOptions& options);

/// Sample count for verifying accuracy eps at confidence kappa:
/// the smallest integer N_v with N_v >= log(1/kappa) / log(1/(1-eps)).
int n_required(double epsilon, double kappa);

struct VerificationConfig {
  double epsilon = 0.01;
  double kappa = 0.01;
  int t_sim = 300;
  double convergence_tol = 0.05;  // on || y(T) - r ||
  // Rollouts must stay inside this state box; defaults to the training box
  // inflated by 50% when empty.
  Vec operating_lo, operating_hi;
  std::vector<Vec> reference_candidates;  // defaults to the zero reference
};

struct VerificationReport {
  bool pass = false;
  int n_v = 0;
  std::vector<Vec> failures;  // initial states of failed rollouts
  std::string guarantee;      // probabilistic statement when pass
};

/// Simulates N_v closed loops of the policy on the nominal model from random
/// initial states in the training range; a rollout passes when the output
/// converges to its reference by t_sim without leaving the operating box.
VerificationReport probabilistic_verify(const PolicyApproximator& policy,
                                        const PredictionModel& nominal,
                                        const VerificationConfig& config,
                                        std::uint64_t seed);

/// Writes the dataset as CSV `x_1..x_n,r_0..r_N,u_1..u_m` (reference slots
/// are expanded per channel when the reference is vector-valued).
void write_policy_dataset(const std::string& path,
                          const PolicyDataset& dataset);
PolicyDataset read_policy_dataset(const std::string& path,
                                  const PolicyInputLayout& layout);

/// Structured-text verification report.
void write_verification_report(const std::string& path,
                               const VerificationReport& report,
                               const VerificationConfig& config);

/// Policy (de)serialization, a versioned JSON wrapper around the model.
void save_policy(const PolicyApproximator& policy, const std::string& path);
PolicyApproximator load_policy(const std::string& path);

}  // namespace dspc
