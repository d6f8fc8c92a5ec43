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
#include <vector>

#include "dspc/common.hpp"

namespace dspc {

/// Hyperparameters of the evolving composite model. d_u/d_y are the NARX
/// input/output delays; l_max caps the cluster count; create_threshold is the
/// dissimilarity above which a new cluster is spawned.
struct StfHyperParams {
  int d_u = 1;
  int d_y = 1;
  int l_max = 1;
  double create_threshold = 8.0;
  int n_u = 1;
  int n_y = 1;

  int regressor_dim() const { return n_u * d_u + n_y * d_y; }
  void validate() const;
};

/// Initialization and update settings for evolving clusters. sigma0 scales
/// the initial covariance of a fresh cluster, lambda0 the initial residual
/// covariance; rho is the exponential forgetting factor of the running
/// covariance updates.
struct EvolveConfig {
  double sigma0 = 1.0;
  double lambda0 = 1.0;
  double rho = 0.995;
};

/// One ellipsoidal cluster: centroid and covariance live in the joint
/// regressor+output space; the residual covariance lives in output space.
struct Cluster {
  Vec centroid;
  Mat xi;
  Mat lambda;
  long sample_count = 1;
};

struct LocalLinearModel {
  Mat a;  // n_y x n_U
  Vec b;  // n_y
};

/// Per-channel affine normalization (value - mean) / scale.
struct ChannelNormalizer {
  Vec mean;
  Vec scale;

  static ChannelNormalizer identity(int n);
  Vec apply(const Vec& raw) const;
  Vec invert(const Vec& normalized) const;
};

/// Evolving composite model: clusters with local linear models blended by a
/// softmax over a dissimilarity metric. The clusters and locals live in the
/// normalized frame defined by norm_in/norm_out; with identity normalizers
/// the model frame coincides with raw units.
///
/// Values are immutable snapshots from the consumer side: evolve() and the
/// learning loop mutate a privately owned copy and publish the result.
struct CompositeStfModel {
  StfHyperParams hyper;
  EvolveConfig evolve_cfg;
  std::vector<Cluster> clusters;
  std::vector<LocalLinearModel> locals;
  // Normalizers for the model input vector (length input_dim) and output.
  ChannelNormalizer norm_in;
  ChannelNormalizer norm_out;
  // Model input dimension. Equals hyper.regressor_dim() for NARX use but may
  // be set independently (the policy approximator feeds generic features).
  int input_dim = 0;

  int output_dim() const { return hyper.n_y; }
  int cluster_count() const { return static_cast<int>(clusters.size()); }
  /// Packed parameter vector length q = L * (n_U + 1).
  int packed_dim() const { return cluster_count() * (input_dim + 1); }

  /// Creates an empty model (no clusters yet) with identity normalizers.
  static CompositeStfModel create(const StfHyperParams& hyper,
                                  const EvolveConfig& cfg = {});
  /// Same, with an explicit input dimension decoupled from the NARX layout.
  static CompositeStfModel create_generic(int input_dim, int output_dim,
                                          int l_max, double create_threshold,
                                          const EvolveConfig& cfg = {});

  /// Local model i mapped into raw units by folding the normalizers into
  /// (A, b). Exact: predict_raw == denormalize(predict(normalize(.))).
  LocalLinearModel raw_local(int i) const;
};

/// Stacks delayed inputs and outputs into the NARX regressor
/// [u(k-1); ...; u(k-d_u); y(k-1); ...; y(k-d_y)]. Histories are passed
/// newest-first.
Vec build_regressor(const std::vector<Vec>& u_hist_newest_first,
                    const std::vector<Vec>& y_hist_newest_first,
                    const StfHyperParams& hyper);

/// Dissimilarity between a data point and a cluster:
/// D = 0.5 * (M^2 + e' Lambda^-1 e) with the Mahalanobis distance M of
/// [u_stf; y] from the centroid and the local model residual e.
double dissimilarity(const Vec& u_stf, const Vec& y, const Cluster& cluster,
                     const LocalLinearModel& local);

/// Softmax interpolation weights over per-cluster dissimilarities. When
/// y_for_residual is null (prediction time, y unknown) the residual term is
/// zero and the Mahalanobis distance is taken over the regressor marginal of
/// each cluster. Exponent shifting makes overflow impossible.
Vec interpolation_weights(const CompositeStfModel& model, const Vec& u_stf,
                          const Vec* y_for_residual = nullptr);

/// Model-frame prediction y = sum_i alpha_i(u_stf) (A_i u_stf + b_i).
Vec predict(const CompositeStfModel& model, const Vec& u_stf);

/// Raw-frame prediction (normalizes the input, denormalizes the output).
Vec predict_raw(const CompositeStfModel& model, const Vec& u_raw);

/// Weights evaluated on a raw-frame input.
Vec interpolation_weights_raw(const CompositeStfModel& model,
                              const Vec& u_raw);

/// Packed regressor zeta = [a_1 u', a_1, ..., a_L u', a_L]' of length
/// q = L (n_U + 1).
Vec pack_regressor(const Vec& u_stf, const Vec& alpha);

/// Packed parameter matrix Phi = [A_1, b_1, ..., A_L, b_L] (n_y x q).
Mat pack_parameters(const CompositeStfModel& model);

/// Writes packed parameters back into the model's local models.
void unpack_parameters(const Mat& phi, CompositeStfModel& model);

struct EvolveOutcome {
  enum Kind { kCreated, kMatched };
  Kind kind = kCreated;
  int cluster_index = 0;
};

/// Routes one data point into the cluster structure: creates a new cluster
/// when the best dissimilarity exceeds the threshold (and room remains),
/// otherwise updates the matched cluster's centroid and covariances. Local
/// model parameters are never touched here; the learning law owns them.
EvolveOutcome evolve(CompositeStfModel& model, const Vec& u_stf, const Vec& y);

/// Serialization to/from a versioned JSON document (matrices row-major).
std::string model_to_json(const CompositeStfModel& model);
CompositeStfModel model_from_json(const std::string& text);
void save_model(const CompositeStfModel& model, const std::string& path);
CompositeStfModel load_model(const std::string& path);

}  // namespace dspc
