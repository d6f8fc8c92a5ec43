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

#include "dspc/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace dspc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError("config field '" + field + "': " + why);
}

const json& need(const json& j, const char* field) {
  if (!j.contains(field)) fail(field, "missing");
  return j.at(field);
}

double num(const json& j, const char* field) {
  const json& v = need(j, field);
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

double num_or(const json& j, const char* field, double fallback) {
  if (!j.contains(field)) return fallback;
  if (!j.at(field).is_number()) fail(field, "expected a number");
  return j.at(field).get<double>();
}

int integer_or(const json& j, const char* field, int fallback) {
  if (!j.contains(field)) return fallback;
  if (!j.at(field).is_number_integer()) fail(field, "expected an integer");
  return j.at(field).get<int>();
}

bool flag_or(const json& j, const char* field, bool fallback) {
  if (!j.contains(field)) return fallback;
  if (!j.at(field).is_boolean()) fail(field, "expected a boolean");
  return j.at(field).get<bool>();
}

std::string text_or(const json& j, const char* field,
                    const std::string& fallback) {
  if (!j.contains(field)) return fallback;
  if (!j.at(field).is_string()) fail(field, "expected a string");
  return j.at(field).get<std::string>();
}

Vec vec_field(const json& j, const char* field) {
  const json& v = need(j, field);
  if (!v.is_array()) fail(field, "expected an array of numbers");
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v.at(i).is_number()) fail(field, "expected an array of numbers");
    out[i] = v.at(i).get<double>();
  }
  return out;
}

Vec vec_or(const json& j, const char* field, const Vec& fallback) {
  if (!j.contains(field)) return fallback;
  return vec_field(j, field);
}

LearningConfig parse_learning(const json& j) {
  LearningConfig c;
  c.rho_offset = num_or(j, "rho_offset", c.rho_offset);
  c.rate = num_or(j, "rate", c.rate);
  c.auto_rate = flag_or(j, "auto_rate", c.auto_rate);
  c.safety_fraction = num_or(j, "safety_fraction", c.safety_fraction);
  c.validate();
  return c;
}

EvolveConfig parse_evolve(const json& j) {
  EvolveConfig c;
  c.sigma0 = num_or(j, "sigma0", c.sigma0);
  c.lambda0 = num_or(j, "lambda0", c.lambda0);
  c.rho = num_or(j, "rho", c.rho);
  if (!(c.rho > 0.0 && c.rho < 1.0)) fail("rho", "must lie in (0,1)");
  return c;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  if (!j.contains("seed")) fail("seed", "missing (all seeds are explicit)");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.out_dir = text_or(j, "out_dir", "out");

  // Plant.
  const json& jp = need(j, "plant");
  cfg.plant.type = text_or(jp, "type", "cartpole");
  if (cfg.plant.type != "cartpole" && cfg.plant.type != "replay") {
    fail("plant.type", "must be 'cartpole' or 'replay'");
  }
  if (jp.contains("params")) {
    const json& pp = jp.at("params");
    cfg.plant.cartpole.m_cart = num_or(pp, "m_cart", 5.0);
    cfg.plant.cartpole.m_pend = num_or(pp, "m_pend", 1.0);
    cfg.plant.cartpole.length = num_or(pp, "length", 2.0);
    cfg.plant.cartpole.k_d = num_or(pp, "k_d", 10.0);
    cfg.plant.cartpole.g = num_or(pp, "g", 9.81);
    cfg.plant.cartpole.t_sample = num_or(pp, "t_sample", 0.1);
    cfg.plant.cartpole.validate();
  }
  {
    const std::string integ = text_or(jp, "integrator", "rk4");
    if (integ == "rk4") {
      cfg.plant.integrator = Integrator::kRk4;
    } else if (integ == "euler") {
      cfg.plant.integrator = Integrator::kEuler;
    } else {
      fail("plant.integrator", "must be 'rk4' or 'euler'");
    }
  }
  cfg.plant.x0 = vec_or(jp, "x0", (Vec(4) << 1.0, 0.0, 0.2, 0.0).finished());
  if (jp.contains("disturbance")) {
    const json& jd = jp.at("disturbance");
    const std::string kind = text_or(jd, "kind", "none");
    if (kind == "none") {
      cfg.plant.disturbance.kind = DisturbanceModel::Kind::kNone;
    } else if (kind == "uniform_box") {
      cfg.plant.disturbance.kind = DisturbanceModel::Kind::kUniformBox;
      cfg.plant.disturbance.half_width = vec_field(jd, "half_width");
      if (!jd.contains("seed")) fail("plant.disturbance.seed", "missing");
      cfg.plant.disturbance.seed = jd.at("seed").get<std::uint64_t>();
    } else {
      fail("plant.disturbance.kind", "must be 'none' or 'uniform_box'");
    }
  }
  cfg.plant.replay_csv = text_or(jp, "replay_csv", "");
  if (cfg.plant.type == "replay" && cfg.plant.replay_csv.empty()) {
    fail("plant.replay_csv", "required for replay plants");
  }

  // Identifier.
  const json& ji = need(j, "identifier");
  cfg.identifier.hyper.d_u = integer_or(ji, "d_u", 2);
  cfg.identifier.hyper.d_y = integer_or(ji, "d_y", 2);
  cfg.identifier.hyper.l_max = integer_or(ji, "l_max", 10);
  cfg.identifier.hyper.create_threshold = num_or(ji, "create_threshold", 6.0);
  cfg.identifier.evolve = parse_evolve(ji);
  cfg.identifier.learning = parse_learning(ji);
  cfg.identifier.stack_capacity_factor =
      integer_or(ji, "stack_capacity_factor", 2);
  cfg.identifier.replace_cadence = integer_or(ji, "replace_cadence", 10);
  cfg.identifier.epochs = integer_or(ji, "epochs", 2);
  cfg.identifier.samples = integer_or(ji, "samples", 5000);
  cfg.identifier.episode_len = integer_or(ji, "episode_len", 40);
  cfg.identifier.train_fraction = num_or(ji, "train_fraction", 0.8);
  cfg.identifier.bfr_floor = num_or(ji, "bfr_floor", 90.0);
  if (ji.contains("excitation")) {
    const json& je = ji.at("excitation");
    ExcitationConfig& ex = cfg.identifier.excitation;
    ex.mode = text_or(je, "mode", "pd");
    if (ex.mode != "pd" && ex.mode != "open_loop") {
      fail("identifier.excitation.mode", "must be 'pd' or 'open_loop'");
    }
    ex.amplitude = num_or(je, "amplitude", ex.amplitude);
    ex.dither = num_or(je, "dither", ex.dither);
    ex.harmonics = integer_or(je, "harmonics", ex.harmonics);
    ex.kp_theta = num_or(je, "kp_theta", ex.kp_theta);
    ex.kd_theta = num_or(je, "kd_theta", ex.kd_theta);
    ex.kp_z = num_or(je, "kp_z", ex.kp_z);
    ex.kd_z = num_or(je, "kd_z", ex.kd_z);
    ex.start_lo = vec_or(je, "start_lo", ex.start_lo);
    ex.start_hi = vec_or(je, "start_hi", ex.start_hi);
  }

  // Receding-horizon controller.
  const json& jn = need(j, "nmpc");
  cfg.nmpc.horizon = integer_or(jn, "horizon", 4);
  if (cfg.nmpc.horizon < 1) fail("nmpc.horizon", "must be >= 1");
  cfg.nmpc.model = text_or(jn, "model", "identified");
  if (cfg.nmpc.model != "identified" && cfg.nmpc.model != "exact") {
    fail("nmpc.model", "must be 'identified' or 'exact'");
  }
  auto weight_vec = [&](const char* field, double fallback) {
    if (!jn.contains(field)) return Vec::Constant(1, fallback).eval();
    if (jn.at(field).is_number()) {
      return Vec::Constant(1, jn.at(field).get<double>()).eval();
    }
    return vec_field(jn, field);
  };
  cfg.nmpc.q_diag = weight_vec("q", 1e-4);
  cfg.nmpc.r_diag = weight_vec("r", 1e-3);
  cfg.nmpc.p_out_diag = weight_vec("p_out", 1.0);
  cfg.nmpc.q_n_diag = weight_vec("q_n", 1e-4);
  cfg.nmpc.p_n_diag = weight_vec("p_n", 2.0);
  cfg.nmpc.p_gamma = num_or(jn, "p_gamma", 1.0);
  cfg.nmpc.u_min = vec_field(jn, "u_min");
  cfg.nmpc.u_max = vec_field(jn, "u_max");
  cfg.nmpc.gamma_min = num_or(jn, "gamma_min", 1e-3);
  cfg.nmpc.max_iter = integer_or(jn, "max_iter", 50);
  cfg.nmpc.kkt_tol = num_or(jn, "kkt_tol", 1e-6);

  // Barrier.
  if (j.contains("barrier")) {
    const json& jb = j.at("barrier");
    cfg.barrier.type = text_or(jb, "type", "abs_box");
    if (cfg.barrier.type != "abs_box" && cfg.barrier.type != "halfspace" &&
        cfg.barrier.type != "norm_ball" && cfg.barrier.type != "none") {
      fail("barrier.type", "unknown barrier type");
    }
    cfg.barrier.output_coord = integer_or(jb, "output_coord", 0);
    cfg.barrier.bound = num_or(jb, "bound", 5.0);
    cfg.barrier.center = num_or(jb, "center", 0.0);
    cfg.barrier.upper = flag_or(jb, "upper", true);
    cfg.barrier.radius = num_or(jb, "radius", 0.5);
    cfg.barrier.eta = num_or(jb, "eta", 1.0);
  }

  // Uncertainty bounds.
  if (j.contains("bounds")) {
    const json& jbo = j.at("bounds");
    if (jbo.contains("eps_w") && jbo.at("eps_w").is_string()) {
      if (jbo.at("eps_w").get<std::string>() != "auto") {
        fail("bounds.eps_w", "must be a number or 'auto'");
      }
      cfg.eps_w_auto = true;
    } else {
      cfg.bounds.eps_w = num_or(jbo, "eps_w", 0.0);
    }
    cfg.bounds.eps_s = num_or(jbo, "eps_s", 0.0);
    cfg.bounds.eps_c = num_or(jbo, "eps_c", 0.0);
  }
  if (cfg.eps_w_auto &&
      cfg.plant.disturbance.kind == DisturbanceModel::Kind::kUniformBox) {
    // Assumed norm bound of a box disturbance: hw * sqrt(n).
    cfg.bounds.eps_w = cfg.plant.disturbance.half_width.maxCoeff() *
                       std::sqrt(static_cast<double>(
                           cfg.plant.disturbance.half_width.size()));
  }
  cfg.bounds.validate();

  // Policy learning.
  const json& jpo = need(j, "policy");
  cfg.policy.l_max = integer_or(jpo, "l_max", 20);
  cfg.policy.create_threshold = num_or(jpo, "create_threshold", 8.0);
  cfg.policy.evolve = parse_evolve(jpo);
  cfg.policy.learning = parse_learning(jpo);
  cfg.policy.stack_capacity_factor =
      integer_or(jpo, "stack_capacity_factor", 2);
  cfg.policy.replace_cadence = integer_or(jpo, "replace_cadence", 25);
  cfg.policy.epochs = integer_or(jpo, "epochs", 1);
  cfg.policy.n_rollouts = integer_or(jpo, "n_rollouts", 60);
  cfg.policy.rollout_steps = integer_or(jpo, "rollout_steps", 40);
  cfg.policy.validation_fraction = num_or(jpo, "validation_fraction", 0.2);
  cfg.policy.truncate_at_bfr = num_or(jpo, "truncate_at_bfr", -1.0);
  if (jpo.contains("references")) {
    const json& jr = jpo.at("references");
    if (!jr.is_array()) fail("policy.references", "expected array of arrays");
    for (const json& r : jr) {
      Vec v(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) v[i] = r.at(i).get<double>();
      cfg.policy.reference_candidates.push_back(std::move(v));
    }
  }
  cfg.policy.scenario_state_lo = vec_or(jpo, "scenario_state_lo", Vec());
  cfg.policy.scenario_state_hi = vec_or(jpo, "scenario_state_hi", Vec());
  cfg.policy.scenario_output_lo = vec_or(jpo, "scenario_output_lo", Vec());
  cfg.policy.scenario_output_hi = vec_or(jpo, "scenario_output_hi", Vec());
  cfg.policy.scenario_input_lo = vec_or(jpo, "scenario_input_lo", Vec());
  cfg.policy.scenario_input_hi = vec_or(jpo, "scenario_input_hi", Vec());
  cfg.policy.epsilon = num_or(jpo, "epsilon", 0.01);
  cfg.policy.kappa = num_or(jpo, "kappa", 0.01);
  cfg.policy.t_sim = integer_or(jpo, "t_sim", 300);
  cfg.policy.convergence_tol = num_or(jpo, "convergence_tol", 0.05);

  // Online adaptation.
  if (j.contains("adaptation")) {
    const json& ja = j.at("adaptation");
    cfg.adaptation.upsilon = num_or(ja, "upsilon", 0.3);
    cfg.adaptation.burn_in = integer_or(ja, "burn_in", 20);
    cfg.adaptation.gain_cap_frac = num_or(ja, "gain_cap_frac", 0.1);
    cfg.adaptation.kkt_relaxation = num_or(ja, "kkt_relaxation", 1.0);
    const std::string variant = text_or(ja, "variant", "contraction");
    if (variant == "contraction") {
      cfg.adaptation.variant = FeedbackVariant::kContraction;
    } else if (variant == "worst_case") {
      cfg.adaptation.variant = FeedbackVariant::kWorstCase;
    } else {
      fail("adaptation.variant", "must be 'contraction' or 'worst_case'");
    }
    cfg.adaptation.observer_reset_period =
        integer_or(ja, "observer_reset_period", 0);
  }

  // Simulation.
  if (j.contains("simulate")) {
    const json& js = j.at("simulate");
    cfg.simulate.steps = integer_or(js, "steps", 300);
    cfg.simulate.reference.value = vec_or(js, "reference", Vec::Zero(2));
    cfg.simulate.reference.step_to = vec_or(js, "reference_step_to", Vec());
    cfg.simulate.reference.step_at = integer_or(js, "reference_step_at", -1);
    cfg.simulate.strict = flag_or(js, "strict", false);
  }

  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

std::optional<BarrierSpec> build_output_barrier(const BarrierConfig& config,
                                                const Mat& output_matrix) {
  if (config.type == "none") return std::nullopt;
  BarrierSpec inner;
  if (config.type == "abs_box") {
    inner = make_abs_box_barrier(config.output_coord, config.bound,
                                 config.center);
  } else if (config.type == "halfspace") {
    inner = make_halfspace_barrier(config.output_coord, config.bound,
                                   config.upper);
  } else if (config.type == "norm_ball") {
    inner = make_norm_ball_barrier(config.radius);
  } else {
    throw ConfigError("unknown barrier type: " + config.type);
  }
  BarrierSpec bound = compose_with_linear(std::move(inner), output_matrix);
  bound.eta = config.eta;
  return bound;
}

}  // namespace dspc
