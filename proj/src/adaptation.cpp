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

#include "dspc/adaptation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace dspc {

SteadyCost make_steady_cost(const CostWeights& weights, const Mat& c_out,
                            const Vec& reference) {
  return [weights, c_out, reference](const Vec& x, const Vec& u) {
    const Vec y = c_out * x;
    return stage_cost(x, u, y, reference, weights) +
           terminal_cost(x, y, reference, weights);
  };
}

SensitivityMatrices linearize(const PredictionModel& model,
                              const SteadyCost& cost, const Vec& x_hat,
                              const Vec& u_tilde) {
  const int n = model.state_dim();
  const int m = model.input_dim();
  require_dim(x_hat, n, "linearize state");
  require_dim(u_tilde, m, "linearize input");

  SensitivityMatrices out;
  out.f_x = Mat(n, n);
  out.f_u = Mat(n, m);
  out.l_x = Eigen::RowVectorXd(n);
  out.l_u = Eigen::RowVectorXd(m);

  for (int i = 0; i < n; ++i) {
    const double h = 1e-5 * (1.0 + std::abs(x_hat[i]));
    Vec xp = x_hat, xm = x_hat;
    xp[i] += h;
    xm[i] -= h;
    out.f_x.col(i) = (model.step(xp, u_tilde) - model.step(xm, u_tilde)) /
                     (2.0 * h);
    out.l_x[i] = (cost(xp, u_tilde) - cost(xm, u_tilde)) / (2.0 * h);
  }
  for (int i = 0; i < m; ++i) {
    const double h = 1e-5 * (1.0 + std::abs(u_tilde[i]));
    Vec up = u_tilde, um = u_tilde;
    up[i] += h;
    um[i] -= h;
    out.f_u.col(i) = (model.step(x_hat, up) - model.step(x_hat, um)) /
                     (2.0 * h);
    out.l_u[i] = (cost(x_hat, up) - cost(x_hat, um)) / (2.0 * h);
  }
  if (!out.f_x.allFinite() || !out.f_u.allFinite() || !out.l_x.allFinite() ||
      !out.l_u.allFinite()) {
    throw NumericalError("linearize: non-finite sensitivities");
  }
  return out;
}

namespace {

// (I - f_x)^-1 rhs with a condition guard.
Mat steady_solve(const Mat& f_x, const Mat& rhs, double condition_bound) {
  const Eigen::Index n = f_x.rows();
  const Mat a = Mat::Identity(n, n) - f_x;
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()[0];
  const double smin = svd.singularValues()[svd.singularValues().size() - 1];
  if (!(smin > 0.0) || smax / smin > condition_bound) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (f_x + f_x.transpose()),
                                          Eigen::EigenvaluesOnly);
    double nearest = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const double d = std::abs(es.eigenvalues()[i] - 1.0);
      if (d < best) {
        best = d;
        nearest = es.eigenvalues()[i];
      }
    }
    throw NumericalError(
        "reduced_gradients: (I - f_x) near singular; f_x has an eigenvalue "
        "at " +
        std::to_string(nearest) + " (condition exceeds bound)");
  }
  return svd.solve(rhs);
}

Eigen::RowVectorXd reduced_cost_gradient(const SensitivityMatrices& sens,
                                         double condition_bound) {
  const Mat s = steady_solve(sens.f_x, sens.f_u, condition_bound);
  return sens.l_x * s + sens.l_u;
}

}  // namespace

ReducedGradients reduced_gradients(const PredictionModel& model,
                                   const SteadyCost& cost, const Vec& x_hat,
                                   const Vec& u_tilde,
                                   const std::vector<ActiveConstraint>& active,
                                   double condition_bound) {
  const int m = model.input_dim();
  const SensitivityMatrices sens = linearize(model, cost, x_hat, u_tilde);
  const Mat s = steady_solve(sens.f_x, sens.f_u, condition_bound);

  ReducedGradients out;
  out.dl = sens.l_x * s + sens.l_u;

  const int a = static_cast<int>(active.size());
  out.dh_a = Mat(a, m);
  out.h_a = Vec(a);
  for (int i = 0; i < a; ++i) {
    out.h_a[i] = active[i].value;
    out.dh_a.row(i) =
        active[i].grad_x.transpose() * s + active[i].grad_u.transpose();
  }

  // Reduced Hessian by differencing the reduced gradient in u, state held at
  // the operating point.
  out.d2l = Mat(m, m);
  for (int i = 0; i < m; ++i) {
    const double h = 1e-4 * (1.0 + std::abs(u_tilde[i]));
    Vec up = u_tilde, um = u_tilde;
    up[i] += h;
    um[i] -= h;
    const Eigen::RowVectorXd gp = reduced_cost_gradient(
        linearize(model, cost, x_hat, up), condition_bound);
    const Eigen::RowVectorXd gm = reduced_cost_gradient(
        linearize(model, cost, x_hat, um), condition_bound);
    out.d2l.row(i) = (gp - gm) / (2.0 * h);
  }
  out.d2l = 0.5 * (out.d2l + out.d2l.transpose());

  if (a == 0) {
    out.n_basis = Mat::Identity(m, m);
  } else {
    Eigen::JacobiSVD<Mat> svd(out.dh_a, Eigen::ComputeFullV);
    const double tol = std::max(out.dh_a.rows(), out.dh_a.cols()) *
                       std::numeric_limits<double>::epsilon() *
                       svd.singularValues()[0];
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()[i] > tol) ++rank;
    }
    out.n_basis = svd.matrixV().rightCols(m - rank);
  }
  return out;
}

KktStepResult kkt_step(const Vec& delta_u, const ReducedGradients& grads,
                       double gain_cap) {
  const Eigen::Index m = delta_u.size();
  const Eigen::Index a = grads.dh_a.rows();
  const Eigen::Index nb = grads.n_basis.cols();
  if (a + nb != m) {
    throw DimensionError("kkt_step: active set plus null space must fill the "
                         "input dimension");
  }
  Mat stacked(m, m);
  Vec residual(m);
  if (a > 0) {
    stacked.topRows(a) = grads.dh_a;
    residual.head(a) = grads.h_a;
  }
  Mat d2l_reg = grads.d2l;
  d2l_reg.diagonal().array() += 1e-8;
  if (nb > 0) {
    stacked.bottomRows(nb) = grads.n_basis.transpose() * d2l_reg;
    residual.tail(nb) = grads.n_basis.transpose() * grads.dl.transpose();
  }

  KktStepResult out;
  out.residual_norm = residual.norm();
  Eigen::FullPivLU<Mat> lu(stacked);
  Vec step;
  if (lu.isInvertible()) {
    step = lu.solve(residual);
  } else {
    // Singular stacked matrix: damped pseudo-inverse step.
    out.damped = true;
    Eigen::JacobiSVD<Mat> svd(stacked,
                              Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vec inv_sv = svd.singularValues();
    for (Eigen::Index i = 0; i < inv_sv.size(); ++i) {
      inv_sv[i] = inv_sv[i] / (inv_sv[i] * inv_sv[i] + 1e-8);
    }
    step = svd.matrixV() * inv_sv.asDiagonal() *
           svd.matrixU().transpose() * residual;
  }
  if (gain_cap > 0.0 && step.norm() > gain_cap) {
    step *= gain_cap / step.norm();
  }
  out.delta_u = delta_u - step;
  return out;
}

void FeedbackGains::validate(const Mat& f_u, double diag_tol) const {
  const Mat prod = gamma * f_u;
  Mat off = prod;
  off.diagonal().setZero();
  if (off.norm() > diag_tol) {
    throw NumericalError("FeedbackGains: Gamma * f_u is not diagonal");
  }
  for (Eigen::Index i = 0; i < upsilon.rows(); ++i) {
    if (!(upsilon(i, i) >= 0.0 && upsilon(i, i) < 1.0)) {
      throw ArgumentError("FeedbackGains: Upsilon diagonal must lie in [0,1)");
    }
  }
}

FeedbackGains design_feedback_gains(const Mat& f_u, double upsilon) {
  if (!(upsilon >= 0.0 && upsilon < 1.0)) {
    throw ArgumentError("design_feedback_gains: upsilon must lie in [0,1)");
  }
  const Eigen::Index m = f_u.cols();
  FeedbackGains gains;
  gains.gamma = f_u.completeOrthogonalDecomposition().pseudoInverse();
  // Zero the off-diagonal coupling left by rounding.
  const Mat prod = gains.gamma * f_u;
  Mat off = prod;
  off.diagonal().setZero();
  if (off.norm() > 1e-12) {
    // Rescale rows so the product diagonal stays, coupling removed to first
    // order: Gamma <- diag(prod)^{-1} ... kept simple because pinv already
    // yields the identity whenever f_u has full column rank.
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = prod(i, i);
      if (std::abs(d) > 1e-12) gains.gamma.row(i) /= d;
    }
  }
  gains.upsilon = upsilon * Mat::Identity(m, m);
  return gains;
}

Vec feedback_term(const Vec& x_hat, const Vec& x, const FeedbackGains& gains,
                  const Mat& f_u, const UncertaintyBounds& bounds,
                  FeedbackVariant variant) {
  bounds.validate();
  const Vec s = gains.gamma * (x_hat - x);
  const Mat prod = gains.gamma * f_u;
  const Eigen::Index m = s.size();
  Vec numerator = gains.upsilon * s;
  if (variant == FeedbackVariant::kWorstCase) {
    const Vec ones = Vec::Ones(gains.gamma.cols());
    numerator += bounds.eps_w * (gains.gamma * ones) +
                 bounds.eps_s * (gains.gamma * ones);
  }
  Vec k(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = prod(i, i);
    if (std::abs(d) < 1e-6) {
      throw NumericalError(
          "feedback_term: Gamma f_u diagonal entry near zero; redesign Gamma");
    }
    k[i] = numerator[i] / d;
  }
  return k;
}

Vec adapt(const Vec& u_tilde, const Vec& delta_u, const Vec& feedback,
          const Vec& u_min, const Vec& u_max) {
  return clamp(u_tilde + delta_u + feedback, u_min, u_max);
}

OnlineAdapter::OnlineAdapter(const PolicyApproximator& policy,
                             const PredictionModel& model,
                             const SteadyCost& cost, const Vec& u_min,
                             const Vec& u_max, const UncertaintyBounds& bounds,
                             const std::optional<BarrierSpec>& barrier,
                             const Vec& x0, const AdaptationConfig& config)
    : policy_(&policy),
      model_(&model),
      cost_(cost),
      u_min_(u_min),
      u_max_(u_max),
      bounds_(bounds),
      barrier_(barrier),
      config_(config),
      observer_(model, x0, config.observer_reset_period) {
  state_.delta_u = Vec::Zero(model.input_dim());
  state_.s = Vec::Zero(model.input_dim());
  state_.x_hat = x0;
}

std::vector<ActiveConstraint> OnlineAdapter::detect_active(
    const Vec& x_hat, const Vec& u) const {
  std::vector<ActiveConstraint> active;
  const int n = model_->state_dim();
  const int m = model_->input_dim();
  for (int i = 0; i < m; ++i) {
    if (std::abs(u[i] - u_max_[i]) <= config_.active_tol) {
      ActiveConstraint c;
      c.value = u[i] - u_max_[i];
      c.grad_x = Vec::Zero(n);
      c.grad_u = Vec::Zero(m);
      c.grad_u[i] = 1.0;
      active.push_back(std::move(c));
    } else if (std::abs(u[i] - u_min_[i]) <= config_.active_tol) {
      ActiveConstraint c;
      c.value = u_min_[i] - u[i];
      c.grad_x = Vec::Zero(n);
      c.grad_u = Vec::Zero(m);
      c.grad_u[i] = -1.0;
      active.push_back(std::move(c));
    }
  }
  if (barrier_.has_value()) {
    const double margin = barrier_->eta * bounds_.total();
    const double value = barrier_->h(x_hat) + margin;
    if (std::abs(value) <= config_.active_tol) {
      ActiveConstraint c;
      c.value = value;
      c.grad_x = barrier_->grad(x_hat);
      c.grad_u = Vec::Zero(m);
      active.push_back(std::move(c));
    }
  }
  return active;
}

double OnlineAdapter::kkt_residual_at(const Vec& x_hat, const Vec& u) const {
  const ReducedGradients grads =
      reduced_gradients(*model_, cost_, x_hat, u, detect_active(x_hat, u),
                        config_.condition_bound);
  const Eigen::Index a = grads.dh_a.rows();
  Vec residual(a + grads.n_basis.cols());
  if (a > 0) residual.head(a) = grads.h_a;
  residual.tail(grads.n_basis.cols()) =
      grads.n_basis.transpose() * grads.dl.transpose();
  return residual.norm();
}

Vec OnlineAdapter::control(const Vec& x_measured,
                           const std::vector<Vec>& ref_window) {
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();
  const Vec u_tilde = evaluate_policy(*policy_, x_measured, ref_window);
  const auto t_eval = Clock::now();
  const Vec& x_hat = observer_.state();

  double kkt_residual = 0.0;
  if (step_ >= config_.burn_in) {
    const Vec u_eval = clamp(u_tilde + state_.delta_u, u_min_, u_max_);
    try {
      const ReducedGradients grads = reduced_gradients(
          *model_, cost_, x_hat, u_eval, detect_active(x_hat, u_eval),
          config_.condition_bound);
      const double cap =
          config_.gain_cap_frac * (u_max_ - u_min_).norm();
      KktStepResult res = kkt_step(state_.delta_u, grads, cap);
      kkt_residual = res.residual_norm;
      state_.delta_u +=
          config_.kkt_relaxation * (res.delta_u - state_.delta_u);
    } catch (const NumericalError&) {
      ++skipped_kkt_;  // ill-conditioned point; keep the previous correction
    }
  }

  const Vec u_mpc = clamp(u_tilde + state_.delta_u, u_min_, u_max_);

  // Ancillary feedback against the nominal trajectory.
  const AffineStateMatrices lin = model_->linearize(x_hat, u_mpc);
  bool redesign = !gains_ready_;
  if (gains_ready_) {
    Mat off = gains_.gamma * lin.a_t1;
    off.diagonal().setZero();
    redesign = off.norm() > 1e-3;
  }
  if (redesign) {
    gains_ = design_feedback_gains(lin.a_t1, config_.upsilon);
    gains_ready_ = true;
  }
  const Vec k_fb =
      feedback_term(x_hat, x_measured, gains_, lin.a_t1, bounds_,
                    config_.variant);
  state_.s = gains_.gamma * (x_hat - x_measured);

  const auto t_compose0 = Clock::now();
  const Vec u = adapt(u_tilde, state_.delta_u, k_fb, u_min_, u_max_);
  const auto t_compose1 = Clock::now();

  auto us = [](auto a, auto b) {
    return std::chrono::duration<double, std::micro>(b - a).count();
  };
  AdaptationLogRow row;
  row.k = step_;
  row.u_tilde = u_tilde;
  row.delta_u = state_.delta_u;
  row.feedback = k_fb;
  row.s_norm = state_.s.norm();
  row.kkt_residual = kkt_residual;
  row.eval_us = us(t_start, t_eval);
  row.compose_us = us(t_compose0, t_compose1);
  row.total_us = us(t_start, t_compose1);
  log_.push_back(std::move(row));

  observer_.advance(u_mpc, x_measured);
  state_.x_hat = observer_.state();
  ++step_;
  return u;
}

void write_adaptation_log(const std::string& path,
                          const std::vector<AdaptationLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  if (log.empty()) {
    out << "k,s_norm,kkt_residual\n";
    return;
  }
  const Eigen::Index m = log[0].u_tilde.size();
  out << "k";
  for (Eigen::Index i = 1; i <= m; ++i) out << ",u_tilde_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",delta_u_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",K_" << i;
  out << ",s_norm,kkt_residual\n";
  char buf[64];
  for (const AdaptationLogRow& r : log) {
    out << r.k;
    auto emit = [&](const Vec& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v[i]);
        out << buf;
      }
    };
    emit(r.u_tilde);
    emit(r.delta_u);
    emit(r.feedback);
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", r.s_norm,
                  r.kkt_residual);
    out << buf;
  }
}

}  // namespace dspc
