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
#include <utility>
#include <vector>

#include "dspc/concurrent_learning.hpp"
#include "dspc/stf_model.hpp"

namespace dspc {

/// One raw training pair: model input vector and measured output.
struct TrainingPair {
  Vec in;
  Vec out;
};

struct TrainOptions {
  LearningConfig learning;
  int stack_capacity_factor = 2;  // capacity = factor * packed_dim
  // Once the stack is full, replacement is attempted only every Nth sample
  // (each attempt scans all candidate swaps, which costs an eigensolve per
  // stored entry).
  int replace_cadence = 10;
  // Rank is rechecked every Nth sample until it first holds.
  int rank_check_cadence = 10;
  int epochs = 1;
  // Optional early stop: when >= 0, training halts as soon as the callback
  // (evaluated every eval_cadence samples) reports a value >= stop_at.
  double stop_at = -1.0;
  int eval_cadence = 500;
  std::function<double(const CompositeStfModel&)> eval;
};

struct TrainTraceRow {
  long step = 0;
  bool rank_ok = false;
  double lambda_min_h2 = 0.0;
  double rate = 0.0;
  double frob_param_delta = 0.0;
};

struct TrainResult {
  CompositeStfModel model;
  std::vector<TrainTraceRow> trace;
  long rank_achieved_step = -1;
  long updates_applied = 0;
  long samples_seen = 0;
  bool stopped_early = false;
};

/// Fits per-channel zero-mean/unit-variance normalizers over a sample set.
ChannelNormalizer fit_normalizer(const std::vector<Vec>& samples);

/// Tiles per-channel input/output normalizers over the NARX regressor slots.
ChannelNormalizer tile_narx_normalizer(const ChannelNormalizer& norm_u,
                                       const ChannelNormalizer& norm_y,
                                       const StfHyperParams& hyper);

/// Runs the evolving-cluster + concurrent-learning loop over the data. The
/// model must carry its normalizers already; data pairs are raw. Parameter
/// updates start once the history stack satisfies the rank condition; when a
/// cluster is created mid-run the packed dimension grows and stored stack
/// entries are zero-padded for the new block.
TrainResult train_composite_model(CompositeStfModel model,
                                  const std::vector<TrainingPair>& data,
                                  const TrainOptions& options);

/// Writes a training trace as CSV
/// `step,rank_ok,lambda_min_H2,r,frob_param_delta`.
void write_training_trace(const std::string& path,
                          const std::vector<TrainTraceRow>& trace);

/// One-step-ahead predictions over pairs; rows align with data order.
Mat predict_pairs(const CompositeStfModel& model,
                  const std::vector<TrainingPair>& data);

/// Measured outputs of pairs as a matrix (rows = samples).
Mat measured_outputs(const std::vector<TrainingPair>& data);

}  // namespace dspc
