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
#include <optional>
#include <vector>

#include "dspc/nmpc.hpp"
#include "dspc/policy.hpp"
#include "dspc/state_space.hpp"

namespace dspc {

/// First-order sensitivities of the model and the steady-state cost at an
/// operating point.
struct SensitivityMatrices {
  Mat f_x;                  // n x n
  Mat f_u;                  // n x m
  Eigen::RowVectorXd l_x;   // 1 x n
  Eigen::RowVectorXd l_u;   // 1 x m
};

/// Steady-state cost closure l(x, u) used by the correction layer.
using SteadyCost = std::function<double(const Vec&, const Vec&)>;

/// Builds l(x,u) = stage + terminal cost against a fixed reference.
SteadyCost make_steady_cost(const CostWeights& weights, const Mat& c_out,
                            const Vec& reference);

/// Central finite differences of the model step and cost; exact for locally
/// linear models up to rounding.
SensitivityMatrices linearize(const PredictionModel& model,
                              const SteadyCost& cost, const Vec& x_hat,
                              const Vec& u_tilde);

/// One active constraint of the reduced steady-state problem: current value
/// and gradients with respect to state and input.
struct ActiveConstraint {
  double value = 0.0;
  Vec grad_x;
  Vec grad_u;
};

struct ReducedGradients {
  Eigen::RowVectorXd dl;  // 1 x m, reduced cost gradient
  Mat dh_a;               // a x m, active-constraint Jacobian
  Mat d2l;                // m x m, reduced Hessian estimate
  Mat n_basis;            // m x (m - a), orthonormal null space of dh_a
  Vec h_a;                // active-constraint values
};

/// Chains the steady-state sensitivity S = (I - f_x)^-1 f_u through the cost
/// and active-constraint gradients; the reduced Hessian is finite-differenced
/// in u with the state held at the operating point. Throws when (I - f_x) is
/// near singular (an eigenvalue of f_x sits at 1).
ReducedGradients reduced_gradients(const PredictionModel& model,
                                   const SteadyCost& cost, const Vec& x_hat,
                                   const Vec& u_tilde,
                                   const std::vector<ActiveConstraint>& active,
                                   double condition_bound = 1e8);

struct KktStepResult {
  Vec delta_u;
  double residual_norm = 0.0;  // ||[h_a; N' dl]|| before the step
  bool damped = false;         // pseudo-inverse fallback used
};

/// Newton-style correction: delta_u <- delta_u - K0 [h_a(u); N' dl(u)] with
/// K0 the inverse of [dh_a; N' d2l]; the step is norm-clipped to gain_cap.
KktStepResult kkt_step(const Vec& delta_u, const ReducedGradients& grads,
                       double gain_cap);

/// Ancillary feedback gains: Gamma chosen so Gamma*f_u is diagonal, Upsilon
/// diagonal with entries in [0, 1).
struct FeedbackGains {
  Mat gamma;    // m x n
  Mat upsilon;  // m x m diagonal

  void validate(const Mat& f_u, double diag_tol = 1e-8) const;
};

/// Builds Gamma = pinv(f_u) (so Gamma f_u = I) with uniform Upsilon.
FeedbackGains design_feedback_gains(const Mat& f_u, double upsilon);

enum class FeedbackVariant {
  kContraction,  // K_i = (Upsilon s)_i / (Gamma f_u)_ii
  kWorstCase,    // adds the Gamma eps_w + Gamma eps_s constant offsets
};

/// Feedback term K driving the plant state toward the nominal trajectory;
/// s = Gamma (x_hat - x). Throws when a diagonal entry of Gamma f_u is
/// smaller than 1e-6 in magnitude.
Vec feedback_term(const Vec& x_hat, const Vec& x, const FeedbackGains& gains,
                  const Mat& f_u, const UncertaintyBounds& bounds,
                  FeedbackVariant variant = FeedbackVariant::kContraction);

/// Final composition u = clamp(u_tilde + delta_u + K, box).
Vec adapt(const Vec& u_tilde, const Vec& delta_u, const Vec& feedback,
          const Vec& u_min, const Vec& u_max);

/// Propagates the nominal trajectory x_hat(k+1) = f(x_hat(k), u_mpc(k)),
/// optionally resetting to the measurement every reset_period steps.
class NominalObserver {
 public:
  NominalObserver(const PredictionModel& model, const Vec& x0,
                  long reset_period = 0)
      : model_(&model), x_hat_(x0), reset_period_(reset_period) {}

  const Vec& state() const { return x_hat_; }

  void advance(const Vec& u_mpc, const Vec& x_measured) {
    x_hat_ = model_->step(x_hat_, u_mpc);
    ++steps_;
    if (reset_period_ > 0 && steps_ % reset_period_ == 0) x_hat_ = x_measured;
  }

 private:
  const PredictionModel* model_;
  Vec x_hat_;
  long steps_ = 0;
  long reset_period_;
};

struct AdaptationConfig {
  double upsilon = 0.3;
  int burn_in = 20;           // steps before the KKT correction engages
  double gain_cap_frac = 0.1;  // per-step cap as a fraction of the input range
  double kkt_relaxation = 1.0;  // scales the Newton step (1 = full step)
  FeedbackVariant variant = FeedbackVariant::kContraction;
  long observer_reset_period = 0;  // 0 = never
  double active_tol = 1e-6;
  double condition_bound = 1e8;
};

struct AdaptationState {
  Vec delta_u;
  Vec s;
  Vec x_hat;
};

struct AdaptationLogRow {
  long k = 0;
  Vec u_tilde;
  Vec delta_u;
  Vec feedback;
  double s_norm = 0.0;
  double kkt_residual = 0.0;
  // Wall-clock costs of the pure online operations at this step.
  double eval_us = 0.0;     // policy evaluation
  double compose_us = 0.0;  // final clamp-and-sum composition
  double total_us = 0.0;    // whole control() call
};

/// Per-step orchestration of the online correction around a trained policy:
/// policy evaluation, KKT correction of the steady-state deviation, ancillary
/// feedback against the nominal trajectory, and the clamped composition.
class OnlineAdapter {
 public:
  OnlineAdapter(const PolicyApproximator& policy, const PredictionModel& model,
                const SteadyCost& cost, const Vec& u_min, const Vec& u_max,
                const UncertaintyBounds& bounds,
                const std::optional<BarrierSpec>& barrier, const Vec& x0,
                const AdaptationConfig& config);

  /// Computes the applied input for the measured state and reference window,
  /// then advances the nominal observer.
  Vec control(const Vec& x_measured, const std::vector<Vec>& ref_window);

  /// Swaps the steady-state cost (used when the reference steps mid-run).
  void set_steady_cost(SteadyCost cost) { cost_ = std::move(cost); }

  const AdaptationState& state() const { return state_; }
  const std::vector<AdaptationLogRow>& log() const { return log_; }
  long skipped_kkt_steps() const { return skipped_kkt_; }

  /// Steady-state KKT residual ||[h_a; N' dl]|| at a given operating point.
  double kkt_residual_at(const Vec& x_hat, const Vec& u) const;

 private:
  std::vector<ActiveConstraint> detect_active(const Vec& x_hat,
                                              const Vec& u) const;

  const PolicyApproximator* policy_;
  const PredictionModel* model_;
  SteadyCost cost_;
  Vec u_min_, u_max_;
  UncertaintyBounds bounds_;
  std::optional<BarrierSpec> barrier_;
  AdaptationConfig config_;
  NominalObserver observer_;
  AdaptationState state_;
  FeedbackGains gains_;
  bool gains_ready_ = false;
  long step_ = 0;
  long skipped_kkt_ = 0;
  std::vector<AdaptationLogRow> log_;
};

/// Writes the adaptation log as CSV
/// `k,u_tilde,delta_u,K,s_norm,kkt_residual` (vector columns per channel).
void write_adaptation_log(const std::string& path,
                          const std::vector<AdaptationLogRow>& log);

}  // namespace dspc
