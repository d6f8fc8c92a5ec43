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

#include "dspc/plants.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dspc/rng.hpp"

namespace dspc {

void CartPoleParams::validate() const {
  if (!(m_cart > 0.0 && m_pend > 0.0 && length > 0.0 && k_d > 0.0 &&
        g > 0.0 && t_sample > 0.0)) {
    throw ArgumentError("CartPoleParams: all parameters must be > 0");
  }
}

std::pair<double, double> cartpole_accels(const CartPoleParams& p,
                                          const Vec& state, double force) {
  require_dim(state, 4, "cartpole state");
  const double z_dot = state[1];
  const double th = state[2];
  const double th_dot = state[3];
  const double s = std::sin(th);
  const double c = std::cos(th);
  const double denom = p.m_cart + p.m_pend * s * s;
  const double z_dd =
      (force - p.k_d * z_dot -
       p.m_pend * (p.length * th_dot * th_dot * s - p.g * s * c)) /
      denom;
  const double th_dd = (z_dd * c + p.g * s) / p.length;
  return {z_dd, th_dd};
}

namespace {

Vec cartpole_deriv(const CartPoleParams& p, const Vec& x, double force) {
  const auto [z_dd, th_dd] = cartpole_accels(p, x, force);
  Vec dx(4);
  dx << x[1], z_dd, x[3], th_dd;
  return dx;
}

}  // namespace

Vec cartpole_step(const CartPoleParams& p, const Vec& state, double force,
                  const Vec& w, Integrator integrator) {
  require_dim(state, 4, "cartpole state");
  require_dim(w, 4, "cartpole disturbance");
  const double h = p.t_sample;
  Vec next(4);
  if (integrator == Integrator::kEuler) {
    next = state + h * cartpole_deriv(p, state, force);
  } else {
    const Vec k1 = cartpole_deriv(p, state, force);
    const Vec k2 = cartpole_deriv(p, state + 0.5 * h * k1, force);
    const Vec k3 = cartpole_deriv(p, state + 0.5 * h * k2, force);
    const Vec k4 = cartpole_deriv(p, state + h * k3, force);
    next = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  next += w;
  if (!next.allFinite()) {
    std::ostringstream os;
    os << "cartpole_step: non-finite state from [" << state.transpose()
       << "] with F=" << force;
    throw NumericalError(os.str());
  }
  return next;
}

double cartpole_energy(const CartPoleParams& p, const Vec& state) {
  require_dim(state, 4, "cartpole state");
  const double z_dot = state[1];
  const double th = state[2];
  const double th_dot = state[3];
  // Pendulum bob at (z - L sin, L cos); kinetic term follows.
  const double v2 = z_dot * z_dot -
                    2.0 * p.length * z_dot * th_dot * std::cos(th) +
                    p.length * p.length * th_dot * th_dot;
  return 0.5 * p.m_cart * z_dot * z_dot + 0.5 * p.m_pend * v2 +
         p.m_pend * p.g * p.length * std::cos(th);
}

void DisturbanceModel::validate(int n) const {
  if (kind == Kind::kUniformBox) {
    if (half_width.size() != n) {
      throw DimensionError("DisturbanceModel.half_width dimension mismatch");
    }
    if ((half_width.array() < 0.0).any()) {
      throw ArgumentError("DisturbanceModel.half_width must be >= 0");
    }
  }
}

Vec sample_disturbance(const DisturbanceModel& model, int n, long k) {
  if (model.kind == DisturbanceModel::Kind::kNone) return Vec::Zero(n);
  model.validate(n);
  Rng rng(Rng::derive(model.seed, static_cast<std::uint64_t>(k)));
  Vec w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = rng.uniform(-model.half_width[i], model.half_width[i]);
  }
  return w;
}

Vec CartPoleModel::step(const Vec& x, const Vec& u) const {
  require_dim(u, 1, "cartpole input");
  return cartpole_step(params_, x, u[0], Vec::Zero(4), integrator_);
}

Mat CartPoleModel::output_matrix() const {
  Mat c = Mat::Zero(2, 4);
  c(0, 0) = 1.0;
  c(1, 2) = 1.0;
  return c;
}

AffineStateMatrices CartPoleModel::linearize(const Vec& x, const Vec& u) const {
  AffineStateMatrices out;
  out.a_t2 = Mat::Zero(4, 4);
  out.a_t1 = Mat::Zero(4, 1);
  for (int i = 0; i < 4; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    out.a_t2.col(i) = (step(xp, u) - step(xm, u)) / (2.0 * h);
  }
  const double hu = 1e-6 * (1.0 + std::abs(u[0]));
  Vec up = u, um = u;
  up[0] += hu;
  um[0] -= hu;
  out.a_t1.col(0) = (step(x, up) - step(x, um)) / (2.0 * hu);
  out.b_t = step(x, u) - out.a_t2 * x - out.a_t1 * u;
  return out;
}

void write_io_csv(const std::string& path, const std::vector<IoEpisode>& eps,
                  int n_u, int n_y, double dt) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "t";
  for (int i = 1; i <= n_u; ++i) out << ",u_" << i;
  for (int i = 1; i <= n_y; ++i) out << ",y_" << i;
  out << "\n";
  char buf[64];
  for (const IoEpisode& ep : eps) {
    for (std::size_t k = 0; k < ep.u.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(k) * dt);
      out << buf;
      for (int i = 0; i < n_u; ++i) {
        std::snprintf(buf, sizeof(buf), ",%.17g", ep.u[k][i]);
        out << buf;
      }
      for (int i = 0; i < n_y; ++i) {
        std::snprintf(buf, sizeof(buf), ",%.17g", ep.y[k][i]);
        out << buf;
      }
      out << "\n";
    }
  }
}

std::vector<IoEpisode> read_io_csv(const std::string& path, int n_u, int n_y) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open I/O log: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  {
    std::ostringstream expect;
    expect << "t";
    for (int i = 1; i <= n_u; ++i) expect << ",u_" << i;
    for (int i = 1; i <= n_y; ++i) expect << ",y_" << i;
    if (line != expect.str()) {
      throw ConfigError(path + ":1: header mismatch, expected '" +
                        expect.str() + "'");
    }
  }
  std::vector<IoEpisode> episodes;
  double prev_t = -1.0;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": malformed value '" + cell + "'");
      }
    }
    if (static_cast<int>(vals.size()) != 1 + n_u + n_y) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(1 + n_u + n_y) +
                        " columns, got " + std::to_string(vals.size()));
    }
    if (episodes.empty() || vals[0] <= prev_t) episodes.emplace_back();
    prev_t = vals[0];
    Vec u(n_u), y(n_y);
    for (int i = 0; i < n_u; ++i) u[i] = vals[1 + i];
    for (int i = 0; i < n_y; ++i) y[i] = vals[1 + n_u + i];
    episodes.back().u.push_back(std::move(u));
    episodes.back().y.push_back(std::move(y));
  }
  return episodes;
}

ReplayPlant::ReplayPlant(std::string csv_path, int n_u, int n_y)
    : episodes_(read_io_csv(csv_path, n_u, n_y)) {}

bool ReplayPlant::next(Vec* u, Vec* y) {
  while (episode_ < episodes_.size() &&
         index_ >= episodes_[episode_].u.size()) {
    ++episode_;
    index_ = 0;
  }
  if (episode_ >= episodes_.size()) return false;
  *u = episodes_[episode_].u[index_];
  *y = episodes_[episode_].y[index_];
  ++index_;
  return true;
}

}  // namespace dspc
