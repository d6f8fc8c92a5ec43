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

#include "dspc/nmpc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dspc/qp.hpp"

namespace dspc {

namespace {

void check_pd(const Mat& m, Eigen::Index dim, const char* name) {
  if (m.rows() != dim || m.cols() != dim) {
    throw DimensionError(std::string("CostWeights.") + name +
                         ": wrong dimensions");
  }
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string("CostWeights.") + name +
                         " is not positive definite");
  }
}

double quad(const Vec& v, const Mat& w) { return v.dot(w * v); }

}  // namespace

void CostWeights::validate(int n, int m, int l) const {
  check_pd(q, n, "q");
  check_pd(r, m, "r");
  check_pd(p_out, l, "p_out");
  check_pd(q_n, n, "q_n");
  check_pd(p_n, l, "p_n");
  if (!(p_gamma > 0.0)) throw ArgumentError("CostWeights.p_gamma must be > 0");
}

CostWeights CostWeights::diagonal(int n, int m, int l, double q, double r,
                                  double p_out, double q_n, double p_n,
                                  double p_gamma) {
  CostWeights w;
  w.q = q * Mat::Identity(n, n);
  w.r = r * Mat::Identity(m, m);
  w.p_out = p_out * Mat::Identity(l, l);
  w.q_n = q_n * Mat::Identity(n, n);
  w.p_n = p_n * Mat::Identity(l, l);
  w.p_gamma = p_gamma;
  return w;
}

double stage_cost(const Vec& x, const Vec& u, const Vec& y, const Vec& r,
                  const CostWeights& w) {
  return quad(x, w.q) + quad(u, w.r) + quad(y - r, w.p_out);
}

double terminal_cost(const Vec& x, const Vec& y, const Vec& r,
                     const CostWeights& w) {
  return quad(x, w.q_n) + quad(y - r, w.p_n);
}

void OcpProblem::validate() const {
  if (model == nullptr) throw ArgumentError("OcpProblem.model is null");
  if (horizon < 1) throw ArgumentError("OcpProblem.horizon must be >= 1");
  const int n = model->state_dim();
  const int m = model->input_dim();
  const int l = model->output_dim();
  if (x0.size() != n) throw DimensionError("OcpProblem.x0 dimension mismatch");
  if (static_cast<int>(reference.size()) != horizon + 1) {
    throw DimensionError("OcpProblem.reference must have horizon+1 entries");
  }
  for (const Vec& r : reference) {
    if (r.size() != l) throw DimensionError("OcpProblem reference entry size");
  }
  if (u_min.size() != m || u_max.size() != m) {
    throw DimensionError("OcpProblem input bounds dimension mismatch");
  }
  if (((u_max - u_min).array() < 0.0).any()) {
    throw ArgumentError("OcpProblem input bounds must satisfy lo <= hi");
  }
  bounds.validate();
  weights.validate(n, m, l);
}

OcpSolution NmpcSolver::shift_warm_start(const OcpSolution& previous) {
  OcpSolution shifted = previous;
  if (!previous.u.empty()) {
    shifted.u.erase(shifted.u.begin());
    shifted.u.push_back(previous.u.back());
  }
  shifted.trace.clear();
  return shifted;
}

namespace {

struct Linearization {
  std::vector<Vec> x;                   // nonlinear rollout, length N+1
  std::vector<AffineStateMatrices> ab;  // length N
  std::vector<Mat> sens;                // dx_k / du_seq, length N+1
};

Linearization roll_and_linearize(const OcpProblem& pb,
                                 const std::vector<Vec>& u_seq) {
  const int n = pb.model->state_dim();
  const int m = pb.model->input_dim();
  const int nu_tot = pb.horizon * m;
  Linearization lin;
  lin.x.reserve(pb.horizon + 1);
  lin.sens.reserve(pb.horizon + 1);
  lin.x.push_back(pb.x0);
  lin.sens.push_back(Mat::Zero(n, nu_tot));
  for (int k = 0; k < pb.horizon; ++k) {
    lin.ab.push_back(pb.model->linearize(lin.x[k], u_seq[k]));
    const AffineStateMatrices& s = lin.ab.back();
    Vec next = pb.model->step(lin.x[k], u_seq[k]);
    if (!next.allFinite()) {
      throw NumericalError("nmpc: model produced non-finite state at step " +
                           std::to_string(k + 1));
    }
    Mat sens = s.a_t2 * lin.sens[k];
    sens.middleCols(k * m, m) += s.a_t1;
    lin.x.push_back(std::move(next));
    lin.sens.push_back(std::move(sens));
  }
  return lin;
}

double nonlinear_objective(const OcpProblem& pb, const std::vector<Vec>& u_seq,
                           double gamma, std::vector<Vec>* traj_out) {
  const Mat c = pb.model->output_matrix();
  Vec x = pb.x0;
  double j = 0.0;
  if (traj_out) {
    traj_out->clear();
    traj_out->push_back(x);
  }
  for (int k = 0; k < pb.horizon; ++k) {
    j += stage_cost(x, u_seq[k], c * x, pb.reference[k], pb.weights);
    x = pb.model->step(x, u_seq[k]);
    if (traj_out) traj_out->push_back(x);
  }
  j += terminal_cost(x, c * x, pb.reference[pb.horizon], pb.weights);
  if (pb.barrier.has_value()) j += pb.weights.p_gamma * gamma * gamma;
  return j;
}

// Barrier decay residuals c_k <= 0 along a trajectory.
std::vector<double> barrier_residuals(const OcpProblem& pb,
                                      const std::vector<Vec>& traj,
                                      double gamma) {
  std::vector<double> res;
  if (!pb.barrier.has_value()) return res;
  res.reserve(pb.horizon);
  for (int k = 0; k < pb.horizon; ++k) {
    res.push_back(rcbf_constraint_residual(*pb.barrier, pb.bounds, traj[k],
                                           traj[k + 1], gamma));
  }
  return res;
}

double total_violation(const std::vector<double>& residuals) {
  double v = 0.0;
  for (double r : residuals) v += std::max(0.0, r);
  return v;
}

}  // namespace

OcpSolution NmpcSolver::solve(const OcpProblem& pb,
                              const OcpSolution* warm_start) const {
  pb.validate();
  const int n_steps = pb.horizon;
  const int m = pb.model->input_dim();
  const bool has_barrier = pb.barrier.has_value();
  const int nz = n_steps * m + (has_barrier ? 1 : 0);
  const Mat c_out = pb.model->output_matrix();

  std::vector<Vec> u_seq(n_steps);
  double gamma = has_barrier ? 0.5 : 1.0;
  const Vec u_mid = clamp(Vec::Zero(m), pb.u_min, pb.u_max);
  for (int k = 0; k < n_steps; ++k) u_seq[k] = u_mid;
  if (warm_start != nullptr &&
      static_cast<int>(warm_start->u.size()) == n_steps) {
    for (int k = 0; k < n_steps; ++k) {
      if (warm_start->u[k].size() == m) {
        u_seq[k] = clamp(warm_start->u[k], pb.u_min, pb.u_max);
      }
    }
    if (has_barrier) {
      gamma = std::clamp(warm_start->gamma, settings_.gamma_min, 1.0);
    }
  }

  OcpSolution sol;
  double merit_penalty = 10.0;
  double prev_merit = std::numeric_limits<double>::infinity();
  bool used_soft = false;
  bool merit_monotone = true;
  SolveStatus status = SolveStatus::kMaxIter;
  int iter = 0;

  for (iter = 1; iter <= settings_.max_iter; ++iter) {
    const Linearization lin = roll_and_linearize(pb, u_seq);

    // Exact quadratic expansion of the cost along the linearized dynamics.
    Mat h = Mat::Zero(nz, nz);
    Vec g = Vec::Zero(nz);
    const Mat q_out = c_out.transpose() * pb.weights.p_out * c_out;
    const Mat q_out_n = c_out.transpose() * pb.weights.p_n * c_out;
    for (int k = 0; k <= n_steps; ++k) {
      const Mat& mk = lin.sens[k];
      const Vec& xk = lin.x[k];
      const Mat w_x = (k < n_steps) ? (pb.weights.q + q_out) : (pb.weights.q_n + q_out_n);
      const Mat& p_ref = (k < n_steps) ? pb.weights.p_out : pb.weights.p_n;
      h.topLeftCorner(n_steps * m, n_steps * m).noalias() +=
          2.0 * mk.transpose() * w_x * mk;
      Vec grad_x = 2.0 * (w_x * xk - c_out.transpose() * (p_ref * pb.reference[k]));
      g.head(n_steps * m).noalias() += mk.transpose() * grad_x;
      if (k < n_steps) {
        h.block(k * m, k * m, m, m) += 2.0 * pb.weights.r;
        g.segment(k * m, m) += 2.0 * pb.weights.r * u_seq[k];
      }
    }
    if (has_barrier) {
      h(nz - 1, nz - 1) += 2.0 * pb.weights.p_gamma;
      g[nz - 1] += 2.0 * pb.weights.p_gamma * gamma;
    }
    h.diagonal().array() += 1e-10;

    // Inequality rows: input box, gamma bounds, linearized barrier rows.
    const std::vector<double> resid = barrier_residuals(pb, lin.x, gamma);
    const int n_rows = 2 * n_steps * m + (has_barrier ? 2 + n_steps : 0);
    Mat a = Mat::Zero(n_rows, nz);
    Vec b = Vec::Zero(n_rows);
    int row = 0;
    for (int k = 0; k < n_steps; ++k) {
      for (int i = 0; i < m; ++i) {
        a(row, k * m + i) = 1.0;
        b[row++] = pb.u_max[i] - u_seq[k][i];
        a(row, k * m + i) = -1.0;
        b[row++] = u_seq[k][i] - pb.u_min[i];
      }
    }
    if (has_barrier) {
      a(row, nz - 1) = 1.0;
      b[row++] = 1.0 - gamma;
      a(row, nz - 1) = -1.0;
      b[row++] = gamma - settings_.gamma_min;
      const double margin = pb.barrier->eta * pb.bounds.total();
      for (int k = 0; k < n_steps; ++k) {
        const Vec gk = pb.barrier->grad(lin.x[k]);
        const Vec gk1 = pb.barrier->grad(lin.x[k + 1]);
        a.block(row, 0, 1, n_steps * m) =
            (gk1.transpose() * lin.sens[k + 1] -
             (1.0 - gamma) * gk.transpose() * lin.sens[k]);
        a(row, nz - 1) = pb.barrier->h(lin.x[k]) + margin;
        b[row++] = -resid[k];
      }
    }

    DenseQp qp{h, g, a, b, Mat(), Vec()};
    QpResult qr = solve_qp(qp);
    if (qr.status == QpStatus::kInfeasible && has_barrier) {
      // Soft fallback: one shared slack relaxing the barrier rows.
      used_soft = true;
      const int nzs = nz + 1;
      Mat hs = Mat::Zero(nzs, nzs);
      hs.topLeftCorner(nz, nz) = h;
      hs(nz, nz) = 1.0;
      Vec gs(nzs);
      gs << g, settings_.soft_penalty;
      Mat as = Mat::Zero(n_rows + 1, nzs);
      as.topLeftCorner(n_rows, nz) = a;
      Vec bs(n_rows + 1);
      bs.head(n_rows) = b;
      for (int k = 0; k < n_steps; ++k) {
        as(n_rows - n_steps + k, nz) = -1.0;  // barrier rows get the slack
      }
      as(n_rows, nz) = -1.0;  // slack >= 0
      bs[n_rows] = 0.0;
      QpResult soft = solve_qp(DenseQp{hs, gs, as, bs, Mat(), Vec()});
      if (soft.status == QpStatus::kInfeasible) {
        status = SolveStatus::kInfeasible;
        break;
      }
      qr.z = soft.z.head(nz);
      qr.lambda = soft.lambda.head(n_rows);
      qr.status = soft.status;
    } else if (qr.status == QpStatus::kInfeasible) {
      status = SolveStatus::kInfeasible;
      break;
    }

    const Vec dz = qr.z;
    const double step_inf = dz.lpNorm<Eigen::Infinity>();
    const double viol_now = total_violation(resid);
    const double kkt = std::max(step_inf, viol_now);

    // l1 merit with a penalty dominating the barrier multipliers.
    if (qr.lambda.size() > 0) {
      merit_penalty = std::max(merit_penalty,
                               2.0 * qr.lambda.lpNorm<Eigen::Infinity>());
    }
    auto merit_at = [&](const std::vector<Vec>& u_try, double g_try) {
      std::vector<Vec> traj;
      const double j = nonlinear_objective(pb, u_try, g_try, &traj);
      return j + merit_penalty * total_violation(
                     barrier_residuals(pb, traj, g_try));
    };
    const double merit0 = merit_at(u_seq, gamma);

    if (settings_.keep_trace) {
      sol.trace.push_back(SolverTraceRow{iter, merit0, kkt, step_inf, gamma});
    }

    const double pred_decrease =
        std::max(0.0, -g.dot(dz)) + merit_penalty * viol_now;
    double t = 1.0;
    double merit_t = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      std::vector<Vec> u_try(u_seq);
      for (int k = 0; k < n_steps; ++k) {
        u_try[k] += t * dz.segment(k * m, m);
      }
      const double g_try =
          has_barrier
              ? std::clamp(gamma + t * dz[nz - 1], settings_.gamma_min, 1.0)
              : gamma;
      merit_t = merit_at(u_try, g_try);
      if (merit_t <= merit0 - 1e-4 * t * pred_decrease + 1e-12) {
        u_seq = std::move(u_try);
        gamma = g_try;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    // A sub-tolerance Newton step is still applied before declaring
    // convergence so repeated solves land on the same point.
    if (kkt <= settings_.kkt_tol) {
      status = SolveStatus::kSolved;
      break;
    }
    if (!accepted) {
      // No merit progress available along this direction: stationary for the
      // merit function, treat as converged at the current point.
      status = (kkt <= 1e2 * settings_.kkt_tol) ? SolveStatus::kSolved
                                                : SolveStatus::kMaxIter;
      break;
    }
    if (merit_t > prev_merit + 1e-9) merit_monotone = false;
    prev_merit = merit_t;
  }

  std::vector<Vec> traj;
  const double obj = nonlinear_objective(pb, u_seq, gamma, &traj);
  const std::vector<double> resid = barrier_residuals(pb, traj, gamma);
  double viol = 0.0;
  for (double r : resid) viol = std::max(viol, std::max(0.0, r));
  sol.u = std::move(u_seq);
  sol.x = std::move(traj);
  sol.gamma = gamma;
  sol.objective = obj;
  sol.iterations = std::min(iter, settings_.max_iter);
  sol.constraint_violation = viol;
  sol.used_soft_constraints = used_soft;
  sol.merit_monotone = merit_monotone;
  if (status == SolveStatus::kSolved && viol > settings_.feasibility_tol) {
    status = used_soft ? SolveStatus::kInfeasible : SolveStatus::kMaxIter;
  }
  sol.status = status;
  return sol;
}

SteadyStateSolution NmpcSolver::steady_state_solve(
    const PredictionModel& model, const Vec& reference, const Vec& u_min,
    const Vec& u_max, const std::optional<BarrierSpec>& barrier,
    const UncertaintyBounds& bounds, const CostWeights& weights) const {
  const int n = model.state_dim();
  const int m = model.input_dim();
  const int l = model.output_dim();
  weights.validate(n, m, l);
  bounds.validate();
  require_dim(reference, l, "steady_state_solve reference");
  const Mat c_out = model.output_matrix();
  const bool has_barrier = barrier.has_value();

  // Decision vector [x; u; gamma?]; fixed point kept as an equality row.
  Vec x = Vec::Zero(n);
  Vec u = clamp(Vec::Zero(m), u_min, u_max);
  double gamma = has_barrier ? 0.5 : 1.0;
  const int nz = n + m + (has_barrier ? 1 : 0);

  auto cost_at = [&](const Vec& xx, const Vec& uu, double gg) {
    double j = stage_cost(xx, uu, c_out * xx, reference, weights) +
               terminal_cost(xx, c_out * xx, reference, weights);
    if (has_barrier) j += weights.p_gamma * gg * gg;
    return j;
  };

  SteadyStateSolution out;
  SolveStatus status = SolveStatus::kMaxIter;
  int iter = 0;
  for (iter = 1; iter <= settings_.max_iter; ++iter) {
    const AffineStateMatrices lin = model.linearize(x, u);
    const Vec f_now = model.step(x, u);

    Mat h = Mat::Zero(nz, nz);
    Vec g = Vec::Zero(nz);
    const Mat w_x = weights.q + weights.q_n +
                    c_out.transpose() * (weights.p_out + weights.p_n) * c_out;
    const Vec w_r =
        c_out.transpose() * ((weights.p_out + weights.p_n) * reference);
    h.topLeftCorner(n, n) = 2.0 * w_x;
    h.block(n, n, m, m) = 2.0 * weights.r;
    g.head(n) = 2.0 * (w_x * x - w_r);
    g.segment(n, m) = 2.0 * weights.r * u;
    if (has_barrier) {
      h(nz - 1, nz - 1) = 2.0 * weights.p_gamma;
      g[nz - 1] = 2.0 * weights.p_gamma * gamma;
    }
    h.diagonal().array() += 1e-10;

    // Equality: (I - A) dx - B du = f(x, u) - x.
    Mat a_eq = Mat::Zero(n, nz);
    a_eq.topLeftCorner(n, n) = Mat::Identity(n, n) - lin.a_t2;
    a_eq.block(0, n, n, m) = -lin.a_t1;
    const Vec b_eq = f_now - x;

    const int n_rows = 2 * m + (has_barrier ? 3 : 0);
    Mat a = Mat::Zero(n_rows, nz);
    Vec b = Vec::Zero(n_rows);
    int row = 0;
    for (int i = 0; i < m; ++i) {
      a(row, n + i) = 1.0;
      b[row++] = u_max[i] - u[i];
      a(row, n + i) = -1.0;
      b[row++] = u[i] - u_min[i];
    }
    if (has_barrier) {
      a(row, nz - 1) = 1.0;
      b[row++] = 1.0 - gamma;
      a(row, nz - 1) = -1.0;
      b[row++] = gamma - settings_.gamma_min;
      // gamma (h(x) + margin) <= 0 linearized at (x, gamma).
      const double margin = barrier->eta * bounds.total();
      const double hx = barrier->h(x);
      const Vec gx = barrier->grad(x);
      a.block(row, 0, 1, n) = gamma * gx.transpose();
      a(row, nz - 1) = hx + margin;
      b[row++] = -(gamma * (hx + margin));
    }

    QpResult qr = solve_qp(DenseQp{h, g, a, b, a_eq, b_eq});
    if (qr.status == QpStatus::kInfeasible) {
      status = SolveStatus::kInfeasible;
      break;
    }
    const double step_inf = qr.z.lpNorm<Eigen::Infinity>();
    const double fp_resid = (f_now - x).lpNorm<Eigen::Infinity>();
    if (std::max(step_inf, fp_resid) <= settings_.kkt_tol * 1e-2) {
      status = SolveStatus::kSolved;
      break;
    }
    // Damped full step; the fixed-point equality is re-linearized each pass.
    double t = 1.0;
    const double cost0 = cost_at(x, u, gamma) +
                         10.0 * (model.step(x, u) - x).norm();
    for (int ls = 0; ls < 20; ++ls) {
      const Vec x_try = x + t * qr.z.head(n);
      const Vec u_try = clamp(u + t * qr.z.segment(n, m), u_min, u_max);
      const double g_try =
          has_barrier
              ? std::clamp(gamma + t * qr.z[nz - 1], settings_.gamma_min, 1.0)
              : gamma;
      const double cost_try = cost_at(x_try, u_try, g_try) +
                              10.0 * (model.step(x_try, u_try) - x_try).norm();
      if (cost_try <= cost0 + 1e-12 || ls == 19) {
        x = x_try;
        u = u_try;
        gamma = g_try;
        break;
      }
      t *= 0.5;
    }
  }

  out.x = x;
  out.u = u;
  out.gamma = gamma;
  out.objective = cost_at(x, u, gamma);
  out.fixed_point_residual = (model.step(x, u) - x).norm();
  out.status = status;
  out.iterations = std::min(iter, settings_.max_iter);
  return out;
}

void write_solver_trace(const std::string& path,
                        const std::vector<SolverTraceRow>& trace) {
  std::ofstream outfile(path);
  if (!outfile) throw ConfigError("cannot open for writing: " + path);
  outfile << "iter,merit,kkt_residual,step_norm,gamma\n";
  char buf[256];
  for (const SolverTraceRow& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.iter,
                  r.merit, r.kkt_residual, r.step_norm, r.gamma);
    outfile << buf;
  }
}

}  // namespace dspc
