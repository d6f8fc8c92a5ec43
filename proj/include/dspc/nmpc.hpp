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

#include "dspc/safety.hpp"
#include "dspc/state_space.hpp"

namespace dspc {

/// Quadratic cost weights. All matrices must be positive definite and
/// p_gamma > 0 (regularization on the barrier decay rate).
struct CostWeights {
  Mat q;      // state
  Mat r;      // input
  Mat p_out;  // output tracking
  Mat q_n;    // terminal state
  Mat p_n;    // terminal tracking
  double p_gamma = 1.0;

  void validate(int n, int m, int l) const;

  /// Uniform diagonal weights, handy for configs given as scalars.
  static CostWeights diagonal(int n, int m, int l, double q, double r,
                              double p_out, double q_n, double p_n,
                              double p_gamma);
};

/// Stage cost x'Qx + u'Ru + (y - r)'P(y - r).
double stage_cost(const Vec& x, const Vec& u, const Vec& y, const Vec& r,
                  const CostWeights& w);

/// Terminal cost x'Q_N x + (y - r)'P_N (y - r).
double terminal_cost(const Vec& x, const Vec& y, const Vec& r,
                     const CostWeights& w);

/// Receding-horizon optimal control problem over a prediction model, with
/// box input bounds and an optional robustified barrier constraint imposed
/// at every step of the horizon.
struct OcpProblem {
  int horizon = 1;
  Vec x0;
  std::vector<Vec> reference;  // length horizon + 1, output-space setpoints
  const PredictionModel* model = nullptr;
  Vec u_min, u_max;
  std::optional<BarrierSpec> barrier;  // evaluated on the model state
  UncertaintyBounds bounds;
  CostWeights weights;

  void validate() const;
};

enum class SolveStatus { kSolved, kMaxIter, kInfeasible };

struct SolverTraceRow {
  int iter = 0;
  double merit = 0.0;
  double kkt_residual = 0.0;
  double step_norm = 0.0;
  double gamma = 0.0;
};

struct OcpSolution {
  std::vector<Vec> u;  // length N
  std::vector<Vec> x;  // length N + 1, rolled out on the nonlinear model
  double gamma = 1.0;
  double objective = 0.0;
  int iterations = 0;
  double constraint_violation = 0.0;
  SolveStatus status = SolveStatus::kMaxIter;
  bool used_soft_constraints = false;
  bool merit_monotone = true;
  std::vector<SolverTraceRow> trace;
};

struct SteadyStateSolution {
  Vec x;
  Vec u;
  double gamma = 1.0;
  double objective = 0.0;
  double fixed_point_residual = 0.0;
  SolveStatus status = SolveStatus::kMaxIter;
  int iterations = 0;
};

struct SqpSettings {
  int max_iter = 50;
  double kkt_tol = 1e-6;
  double gamma_min = 1e-3;
  double soft_penalty = 1e6;
  double feasibility_tol = 1e-8;
  bool keep_trace = false;
};

/// Successive-linearization SQP for the barrier-constrained receding-horizon
/// problem. Each iteration linearizes the model along the current trajectory,
/// solves a dense convex QP over (du, dgamma), and line-searches on an l1
/// merit function. With zero uncertainty bounds and no barrier this is the
/// nominal receding-horizon controller.
class NmpcSolver {
 public:
  explicit NmpcSolver(SqpSettings settings = {}) : settings_(settings) {}

  OcpSolution solve(const OcpProblem& problem,
                    const OcpSolution* warm_start = nullptr) const;

  /// Equilibrium problem: minimize stage+terminal cost subject to
  /// x = f(x, u), input bounds, and the barrier row. Solved by the same SQP
  /// machinery with the fixed-point equality kept in the QP.
  SteadyStateSolution steady_state_solve(
      const PredictionModel& model, const Vec& reference, const Vec& u_min,
      const Vec& u_max, const std::optional<BarrierSpec>& barrier,
      const UncertaintyBounds& bounds, const CostWeights& weights) const;

  /// Warm start for the next control step: shift by one, repeat last input.
  static OcpSolution shift_warm_start(const OcpSolution& previous);

  const SqpSettings& settings() const { return settings_; }

 private:
  SqpSettings settings_;
};

/// Writes a solver trace as CSV `iter,merit,kkt_residual,step_norm,gamma`.
void write_solver_trace(const std::string& path,
                        const std::vector<SolverTraceRow>& trace);

}  // namespace dspc
