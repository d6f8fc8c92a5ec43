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

#include "dspc/safety.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "dspc/rng.hpp"

namespace dspc {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ArgumentError("gamma must lie in (0, 1], got " +
                        std::to_string(gamma));
  }
}

}  // namespace

void UncertaintyBounds::validate() const {
  if (eps_w < 0.0 || eps_s < 0.0 || eps_c < 0.0) {
    throw ArgumentError("UncertaintyBounds must be nonnegative");
  }
}

double cbf_decay_check(const BarrierSpec& barrier, const Vec& x_k,
                       const Vec& x_k1, double gamma) {
  check_gamma(gamma);
  return barrier.h(x_k1) - (1.0 - gamma) * barrier.h(x_k);
}

double rcbf_value(const BarrierSpec& barrier, const UncertaintyBounds& bounds,
                  const Vec& x_hat) {
  bounds.validate();
  return barrier.h(x_hat) + barrier.eta * bounds.total();
}

double rcbf_constraint_residual(const BarrierSpec& barrier,
                                const UncertaintyBounds& bounds,
                                const Vec& x_hat_k, const Vec& x_hat_k1,
                                double gamma) {
  check_gamma(gamma);
  bounds.validate();
  return barrier.h(x_hat_k1) - (1.0 - gamma) * barrier.h(x_hat_k) +
         gamma * barrier.eta * bounds.total();
}

LipschitzEstimate estimate_lipschitz(
    const std::function<double(const Vec&)>& h, const Vec& box_lo,
    const Vec& box_hi, int n_samples, std::uint64_t seed, double margin) {
  if (box_lo.size() != box_hi.size() || box_lo.size() == 0) {
    throw ArgumentError("estimate_lipschitz: bad box dimensions");
  }
  if ((box_hi - box_lo).maxCoeff() <= 0.0) {
    throw ArgumentError("estimate_lipschitz: degenerate box");
  }
  if (n_samples < 2) {
    throw ArgumentError("estimate_lipschitz: need at least 2 samples");
  }
  Rng rng(seed);
  double slope = 0.0;
  Vec prev = rng.uniform_vec(box_lo, box_hi);
  double prev_h = h(prev);
  for (int i = 1; i < n_samples; ++i) {
    const Vec a = rng.uniform_vec(box_lo, box_hi);
    const double ha = h(a);
    // Pair against the previous sample and a nearby jitter of it; the short
    // pair probes the local slope, the long pair the global one.
    const double dist = (a - prev).norm();
    if (dist > 0.0) slope = std::max(slope, std::abs(ha - prev_h) / dist);
    Vec near = a + 1e-4 * (box_hi - box_lo).cwiseProduct(rng.normal_vec(a.size()));
    near = clamp(near, box_lo, box_hi);
    const double dn = (near - a).norm();
    if (dn > 0.0) slope = std::max(slope, std::abs(h(near) - ha) / dn);
    prev = a;
    prev_h = ha;
  }
  LipschitzEstimate out;
  if (slope == 0.0) {
    out.eta = 0.0;
    out.degenerate = true;
    return out;
  }
  out.eta = margin * slope;
  return out;
}

BarrierSpec make_abs_box_barrier(int coord, double bound, double center) {
  BarrierSpec spec;
  spec.h = [coord, bound, center](const Vec& x) {
    return std::abs(x[coord] - center) - bound;
  };
  spec.grad = [coord, center](const Vec& x) {
    Vec g = Vec::Zero(x.size());
    const double d = x[coord] - center;
    g[coord] = (d > 0.0) ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    return g;
  };
  spec.eta = 1.0;
  spec.description = "|x[" + std::to_string(coord) + "] - " +
                     std::to_string(center) + "| <= " + std::to_string(bound);
  return spec;
}

BarrierSpec make_halfspace_barrier(int coord, double limit, bool upper) {
  BarrierSpec spec;
  if (upper) {
    spec.h = [coord, limit](const Vec& x) { return x[coord] - limit; };
    spec.grad = [coord](const Vec& x) {
      Vec g = Vec::Zero(x.size());
      g[coord] = 1.0;
      return g;
    };
    spec.description = "x[" + std::to_string(coord) + "] <= " +
                       std::to_string(limit);
  } else {
    spec.h = [coord, limit](const Vec& x) { return limit - x[coord]; };
    spec.grad = [coord](const Vec& x) {
      Vec g = Vec::Zero(x.size());
      g[coord] = -1.0;
      return g;
    };
    spec.description = "x[" + std::to_string(coord) + "] >= " +
                       std::to_string(limit);
  }
  spec.eta = 1.0;
  return spec;
}

BarrierSpec make_norm_ball_barrier(double radius) {
  BarrierSpec spec;
  spec.h = [radius](const Vec& x) { return x.norm() - radius; };
  spec.grad = [](const Vec& x) {
    const double n = x.norm();
    if (n == 0.0) return Vec(Vec::Zero(x.size()));
    return Vec(x / n);
  };
  spec.eta = 1.0;
  spec.description = "||x|| <= " + std::to_string(radius);
  return spec;
}

BarrierSpec compose_max(std::vector<BarrierSpec> parts) {
  if (parts.empty()) throw ArgumentError("compose_max: no parts");
  BarrierSpec spec;
  double eta = 0.0;
  std::string desc = "max(";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    eta = std::max(eta, parts[i].eta);
    if (i > 0) desc += ", ";
    desc += parts[i].description;
  }
  desc += ")";
  auto shared = std::make_shared<std::vector<BarrierSpec>>(std::move(parts));
  spec.h = [shared](const Vec& x) {
    double best = (*shared)[0].h(x);
    for (std::size_t i = 1; i < shared->size(); ++i) {
      best = std::max(best, (*shared)[i].h(x));
    }
    return best;
  };
  spec.grad = [shared](const Vec& x) {
    std::size_t arg = 0;
    double best = (*shared)[0].h(x);
    for (std::size_t i = 1; i < shared->size(); ++i) {
      const double v = (*shared)[i].h(x);
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    return (*shared)[arg].grad(x);
  };
  spec.eta = eta;
  spec.description = std::move(desc);
  return spec;
}

BarrierSpec compose_with_linear(BarrierSpec inner, const Mat& c) {
  BarrierSpec spec;
  auto shared = std::make_shared<BarrierSpec>(std::move(inner));
  const Mat cc = c;
  spec.h = [shared, cc](const Vec& x) { return shared->h(cc * x); };
  spec.grad = [shared, cc](const Vec& x) {
    return Vec(cc.transpose() * shared->grad(cc * x));
  };
  spec.eta = shared->eta;
  spec.description = shared->description + " (on Cx)";
  return spec;
}

}  // namespace dspc
