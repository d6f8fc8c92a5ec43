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

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dspc/config.hpp"

namespace dspc {

/// Per-phase run summary. Every metric is recomputable from the persisted
/// CSV artifacts the report points to.
struct RunReport {
  std::string phase;
  std::map<std::string, double> metrics;
  std::map<std::string, std::string> artifacts;
  std::vector<std::string> notes;
  bool ok = true;
};

void save_report(const RunReport& report, const std::string& path);
RunReport load_report(const std::string& path);

/// Identification data collection: seeded excitation episodes on the
/// configured plant (stabilized PD + multisine + dither, or open loop).
std::vector<IoEpisode> collect_identification_data(
    const ExperimentConfig& cfg);

/// Builds NARX training pairs from episodes (no pairs across boundaries).
std::vector<TrainingPair> episodes_to_pairs(const std::vector<IoEpisode>& eps,
                                            const StfHyperParams& hyper);

/// Offline system identification: collect, normalize, split, train,
/// evaluate. Persists the model, the I/O log, the training trace, and a
/// validation-prediction CSV. ok is false when the fitting rate misses the
/// configured floor.
RunReport run_identify(const ExperimentConfig& cfg);

/// Offline policy learning: dataset from the receding-horizon controller on
/// the nominal model, approximator training, probabilistic verification.
/// ok is false when verification fails.
RunReport run_train_policy(const ExperimentConfig& cfg);

/// Re-verifies a persisted policy without retraining.
RunReport run_verify_policy(const ExperimentConfig& cfg);

/// Closed loop on the true plant under one of the controllers.
RunReport run_simulate(const ExperimentConfig& cfg,
                       const std::string& controller);

/// Comparison table + plots across simulate reports.
RunReport run_compare(const std::vector<std::string>& report_paths,
                      const std::string& out_dir);

/// Per-step timing comparison of the optimizer against the learned policy's
/// online path.
RunReport run_bench(const ExperimentConfig& cfg);

// Exposed building blocks (also used by the test suites).

/// The nominal prediction model selected by the config ('exact' wraps the
/// known plant dynamics; 'identified' loads the persisted composite model).
std::unique_ptr<PredictionModel> build_nominal_model(
    const ExperimentConfig& cfg, std::shared_ptr<const CompositeStfModel>* out_model = nullptr);

/// Cost matrices sized for a model (scalar entries broadcast to diagonals).
CostWeights build_weights(const NmpcConfig& cfg, int n, int m, int l);

SqpSettings build_sqp_settings(const NmpcConfig& cfg);

/// Scenario sampler over the nominal model's state space.
ScenarioSampler build_scenarios(const ExperimentConfig& cfg,
                                const PredictionModel& model);

/// Reference window r(k..k+N) from a reference spec.
std::vector<Vec> reference_window(const ReferenceSpec& ref, int k, int n);

}  // namespace dspc
