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

#include "dspc/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace dspc {

ChannelNormalizer fit_normalizer(const std::vector<Vec>& samples) {
  if (samples.empty()) throw ArgumentError("fit_normalizer: no samples");
  const Eigen::Index n = samples[0].size();
  Vec mean = Vec::Zero(n);
  for (const Vec& s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  Vec var = Vec::Zero(n);
  for (const Vec& s : samples) var += (s - mean).cwiseAbs2();
  var /= static_cast<double>(samples.size());
  ChannelNormalizer norm;
  norm.mean = mean;
  norm.scale = var.cwiseSqrt().cwiseMax(1e-8);
  return norm;
}

ChannelNormalizer tile_narx_normalizer(const ChannelNormalizer& norm_u,
                                       const ChannelNormalizer& norm_y,
                                       const StfHyperParams& hyper) {
  ChannelNormalizer out;
  out.mean = Vec(hyper.regressor_dim());
  out.scale = Vec(hyper.regressor_dim());
  Eigen::Index at = 0;
  for (int i = 0; i < hyper.d_u; ++i) {
    out.mean.segment(at, hyper.n_u) = norm_u.mean;
    out.scale.segment(at, hyper.n_u) = norm_u.scale;
    at += hyper.n_u;
  }
  for (int i = 0; i < hyper.d_y; ++i) {
    out.mean.segment(at, hyper.n_y) = norm_y.mean;
    out.scale.segment(at, hyper.n_y) = norm_y.scale;
    at += hyper.n_y;
  }
  return out;
}

TrainResult train_composite_model(CompositeStfModel model,
                                  const std::vector<TrainingPair>& data,
                                  const TrainOptions& options) {
  if (data.empty()) throw ArgumentError("train_composite_model: no data");
  options.learning.validate();

  TrainResult result;
  HistoryStack stack(model.input_dim + 1,
                     options.stack_capacity_factor * (model.input_dim + 1));
  bool stack_ready = false;
  bool rank_ok = false;
  long step = 0;

  for (int epoch = 0; epoch < options.epochs && !result.stopped_early;
       ++epoch) {
    for (const TrainingPair& pair : data) {
      ++step;
      const Vec u_n = model.norm_in.apply(pair.in);
      const Vec y_n = model.norm_out.apply(pair.out);

      const EvolveOutcome outcome = evolve(model, u_n, y_n);
      if (!stack_ready) {
        stack = HistoryStack(model.packed_dim(),
                             options.stack_capacity_factor * model.packed_dim());
        stack_ready = true;
      } else if (outcome.kind == EvolveOutcome::kCreated) {
        stack.grow_packed_dim(model.packed_dim(),
                              options.stack_capacity_factor * model.packed_dim());
        rank_ok = false;  // the new block starts unexplored
      }

      // The packed regressor uses the inference-time weights so the learned
      // parameters match the deployed predictor exactly.
      const Vec alpha = interpolation_weights(model, u_n);
      const Vec zeta = pack_regressor(u_n, alpha);
      const auto [zbar, m_sig] = normalize_regressor(zeta, options.learning.rho_offset);
      (void)zbar;
      if (!stack.full() || (step % options.replace_cadence == 0)) {
        stack.record(zeta, y_n, m_sig);
      }

      if (!rank_ok && stack.size() >= stack.packed_dim() &&
          (step % options.rank_check_cadence == 0 || stack.full())) {
        // Updates start only once the span is numerically solid, not merely
        // above the SVD rank tolerance.
        rank_ok = rank_condition(stack) && stack.lambda_min_h1() > 1e-10;
        if (rank_ok && result.rank_achieved_step < 0) {
          result.rank_achieved_step = step;
        }
      }

      TrainTraceRow row;
      row.step = step;
      row.rank_ok = rank_ok;
      if (rank_ok) {
        ParameterEstimate estimate{pack_parameters(model), step};
        const ClUpdateInfo info =
            cl_update(estimate, zeta, y_n, stack, options.learning);
        unpack_parameters(estimate.phi, model);
        row.lambda_min_h2 = info.lambda_min_h2;
        row.rate = info.rate_used;
        row.frob_param_delta = info.frob_delta;
        ++result.updates_applied;
      }
      result.trace.push_back(row);

      if (options.stop_at >= 0.0 && options.eval &&
          step % options.eval_cadence == 0) {
        if (options.eval(model) >= options.stop_at) {
          result.stopped_early = true;
          break;
        }
      }
    }
  }
  result.samples_seen = step;
  result.model = std::move(model);
  return result;
}

void write_training_trace(const std::string& path,
                          const std::vector<TrainTraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "step,rank_ok,lambda_min_H2,r,frob_param_delta\n";
  char buf[200];
  for (const TrainTraceRow& r : trace) {
    std::snprintf(buf, sizeof(buf), "%ld,%d,%.17g,%.17g,%.17g\n", r.step,
                  r.rank_ok ? 1 : 0, r.lambda_min_h2, r.rate,
                  r.frob_param_delta);
    out << buf;
  }
}

Mat predict_pairs(const CompositeStfModel& model,
                  const std::vector<TrainingPair>& data) {
  Mat out(data.size(), model.output_dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.row(i) = predict_raw(model, data[i].in).transpose();
  }
  return out;
}

Mat measured_outputs(const std::vector<TrainingPair>& data) {
  if (data.empty()) throw ArgumentError("measured_outputs: no data");
  Mat out(data.size(), data[0].out.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.row(i) = data[i].out.transpose();
  }
  return out;
}

}  // namespace dspc
