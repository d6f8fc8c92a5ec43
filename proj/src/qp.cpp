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

#include "dspc/qp.hpp"

#include <algorithm>
#include <cmath>

namespace dspc {

namespace {

// Largest t in (0, 1] with v + t*dv >= (1 - ftb) * v componentwise.
double step_to_boundary(const Vec& v, const Vec& dv, double ftb = 0.995) {
  double t = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) t = std::min(t, -ftb * v[i] / dv[i]);
  }
  return t;
}

}  // namespace

QpResult solve_qp(const DenseQp& qp, const QpSettings& settings) {
  const Eigen::Index n = qp.h.rows();
  const Eigen::Index m = qp.a.rows();
  const Eigen::Index p = qp.a_eq.rows();
  if (qp.h.cols() != n || qp.g.size() != n) {
    throw DimensionError("solve_qp: objective dimensions inconsistent");
  }
  if (m > 0 && (qp.a.cols() != n || qp.b.size() != m)) {
    throw DimensionError("solve_qp: inequality dimensions inconsistent");
  }
  if (p > 0 && (qp.a_eq.cols() != n || qp.b_eq.size() != p)) {
    throw DimensionError("solve_qp: equality dimensions inconsistent");
  }

  QpResult out;
  if (m == 0 && p == 0) {
    out.z = solve_spd(qp.h, -qp.g, "solve_qp Hessian", 0.0);
    out.status = QpStatus::kSolved;
    out.iterations = 1;
    return out;
  }

  Vec z = Vec::Zero(n);
  Vec nu = Vec::Zero(p);
  Vec s(m), lambda(m);
  if (m > 0) {
    const Vec slack0 = qp.b - qp.a * z;
    for (Eigen::Index i = 0; i < m; ++i) {
      s[i] = std::max(slack0[i], 1.0);
      lambda[i] = 1.0;
    }
  }

  // Solves the reduced Newton system in (dz, dnu) for a given complementarity
  // residual; the slack/multiplier block is eliminated first.
  auto reduced_solve = [&](const Mat& kkt, const Vec& rhs_z, const Vec& r_e) {
    if (p == 0) {
      Eigen::LLT<Mat> llt(kkt);
      if (llt.info() != Eigen::Success) {
        Mat jit = kkt;
        const double scale = jit.diagonal().cwiseAbs().maxCoeff();
        jit.diagonal().array() += 1e-12 + 1e-14 * scale;
        llt.compute(jit);
        if (llt.info() != Eigen::Success) {
          throw NumericalError("solve_qp: KKT factorization failed");
        }
      }
      return std::make_pair(Vec(llt.solve(rhs_z)), Vec());
    }
    Mat aug = Mat::Zero(n + p, n + p);
    aug.topLeftCorner(n, n) = kkt;
    aug.topRightCorner(n, p) = qp.a_eq.transpose();
    aug.bottomLeftCorner(p, n) = qp.a_eq;
    Vec rhs(n + p);
    rhs << rhs_z, -r_e;
    Eigen::LDLT<Mat> ldlt(aug);
    if (ldlt.info() != Eigen::Success) {
      throw NumericalError("solve_qp: augmented KKT factorization failed");
    }
    const Vec sol = ldlt.solve(rhs);
    return std::make_pair(Vec(sol.head(n)), Vec(sol.tail(p)));
  };

  Vec z_best = z;
  bool diverged = false;
  for (int iter = 0; iter <= settings.max_iter; ++iter) {
    Vec r_d = qp.h * z + qp.g;
    if (m > 0) r_d += qp.a.transpose() * lambda;
    if (p > 0) r_d += qp.a_eq.transpose() * nu;
    const Vec r_e = (p > 0) ? Vec(qp.a_eq * z - qp.b_eq) : Vec();
    const Vec r_p = (m > 0) ? Vec(qp.a * z + s - qp.b) : Vec();
    const double mu =
        (m > 0) ? s.dot(lambda) / static_cast<double>(m) : 0.0;

    out.iterations = iter;
    if (!z.allFinite() || !r_d.allFinite() || !std::isfinite(mu)) {
      // Iterates exploded: with a convex objective this only happens when no
      // feasible point exists for the constraints.
      z = z_best;
      diverged = true;
      break;
    }
    z_best = z;
    const double feas_eq = (p > 0) ? r_e.lpNorm<Eigen::Infinity>() : 0.0;
    const double feas_in = (m > 0) ? r_p.lpNorm<Eigen::Infinity>() : 0.0;
    if (r_d.lpNorm<Eigen::Infinity>() < settings.tol &&
        feas_eq < settings.tol && feas_in < settings.tol &&
        mu < settings.tol) {
      out.status = QpStatus::kSolved;
      break;
    }
    // Complementarity closed but a primal gap remains: infeasible problem.
    if (m > 0 && mu < 1e-13 && feas_in > 1e-7) {
      diverged = true;
      break;
    }
    if (iter == settings.max_iter) break;

    Mat kkt = qp.h;
    if (m > 0) {
      // Capped so active constraints cannot overflow the factorization.
      const Vec w = lambda.cwiseQuotient(s).cwiseMin(1e14);
      kkt.noalias() += qp.a.transpose() * w.asDiagonal() * qp.a;
    }

    auto newton = [&](const Vec& r_c) {
      Vec rhs = -r_d;
      if (m > 0) {
        const Vec tmp = (lambda.cwiseProduct(r_p) - r_c).cwiseQuotient(s);
        rhs -= qp.a.transpose() * tmp;
      }
      auto [dz, dnu] = reduced_solve(kkt, rhs, r_e);
      Vec ds, dl;
      if (m > 0) {
        ds = -r_p - qp.a * dz;
        dl = -(r_c + lambda.cwiseProduct(ds)).cwiseQuotient(s);
      }
      struct Dir {
        Vec dz, ds, dl, dnu;
      };
      return Dir{std::move(dz), std::move(ds), std::move(dl), std::move(dnu)};
    };

    if (m == 0) {
      // Pure equality-constrained step: one Newton solve suffices.
      auto dir = newton(Vec());
      z += dir.dz;
      nu += dir.dnu;
      continue;
    }

    // Affine (predictor) direction.
    auto aff = newton(s.cwiseProduct(lambda));
    const double a_pri_aff = step_to_boundary(s, aff.ds, 1.0);
    const double a_dua_aff = step_to_boundary(lambda, aff.dl, 1.0);
    const double mu_aff = (s + a_pri_aff * aff.ds)
                              .dot(lambda + a_dua_aff * aff.dl) /
                          static_cast<double>(m);
    const double sigma =
        std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector with centering.
    Vec r_c = s.cwiseProduct(lambda) + aff.ds.cwiseProduct(aff.dl);
    r_c.array() -= sigma * mu;
    auto dir = newton(r_c);

    const double a_pri = step_to_boundary(s, dir.ds);
    const double a_dua = step_to_boundary(lambda, dir.dl);
    z += a_pri * dir.dz;
    s += a_pri * dir.ds;
    lambda += a_dua * dir.dl;
    if (p > 0) nu += a_dua * dir.dnu;
  }

  out.z = z;
  out.lambda = lambda;
  out.nu = nu;
  double viol = 0.0;
  if (m > 0) viol = (qp.a * z - qp.b).cwiseMax(0.0).maxCoeff();
  if (p > 0) {
    viol = std::max(viol, (qp.a_eq * z - qp.b_eq).cwiseAbs().maxCoeff());
  }
  out.primal_residual = viol;
  if (out.status != QpStatus::kSolved) {
    out.status = (diverged || out.primal_residual > 1e-6)
                     ? QpStatus::kInfeasible
                     : QpStatus::kMaxIter;
  }
  return out;
}

}  // namespace dspc
