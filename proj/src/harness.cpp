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

#include "dspc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dspc/csv.hpp"
#include "dspc/metrics.hpp"
#include "dspc/rng.hpp"
#include "dspc/svg.hpp"

namespace dspc {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double elapsed_us(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + dir);
}

Mat diag_from(const Vec& d, int n, const char* what) {
  if (d.size() == 1) return d[0] * Mat::Identity(n, n);
  if (d.size() == n) return Vec(d).asDiagonal().toDenseMatrix();
  throw ConfigError(std::string("weight '") + what + "' has size " +
                    std::to_string(d.size()) + ", expected 1 or " +
                    std::to_string(n));
}

// Measured-history buffer turning plant I/O into the stacked model state.
class StackedStateTracker {
 public:
  StackedStateTracker(const StfHyperParams& hyper, const Vec& y0)
      : hyper_(hyper) {
    for (int i = 0; i < hyper.d_u - 1; ++i) u_hist_.push_back(Vec::Zero(hyper.n_u));
    for (int i = 0; i < hyper.d_y; ++i) y_hist_.push_back(y0);
  }

  Vec state() const {
    return stack_state({u_hist_.begin(), u_hist_.end()},
                       {y_hist_.begin(), y_hist_.end()}, hyper_);
  }

  void push(const Vec& u, const Vec& y_next) {
    if (hyper_.d_u > 1) {
      u_hist_.push_front(u);
      u_hist_.pop_back();
    }
    y_hist_.push_front(y_next);
    y_hist_.pop_back();
  }

 private:
  StfHyperParams hyper_;
  std::deque<Vec> u_hist_;  // newest first, u(k-1)...
  std::deque<Vec> y_hist_;  // newest first, y(k)...
};

Vec plant_output(const Vec& x_plant) {
  Vec y(2);
  y << x_plant[0], x_plant[2];
  return y;
}

}  // namespace

void save_report(const RunReport& report, const std::string& path) {
  nlohmann::json j;
  j["phase"] = report.phase;
  j["ok"] = report.ok;
  j["metrics"] = report.metrics;
  j["artifacts"] = report.artifacts;
  j["notes"] = report.notes;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report is not valid JSON: ") + e.what());
  }
  RunReport r;
  r.phase = j.value("phase", "");
  r.ok = j.value("ok", false);
  if (j.contains("metrics")) {
    for (auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
  }
  if (j.contains("artifacts")) {
    for (auto& [k, v] : j.at("artifacts").items()) {
      r.artifacts[k] = v.get<std::string>();
    }
  }
  if (j.contains("notes")) {
    for (auto& n : j.at("notes")) r.notes.push_back(n.get<std::string>());
  }
  return r;
}

std::vector<IoEpisode> collect_identification_data(
    const ExperimentConfig& cfg) {
  if (cfg.plant.type == "replay") {
    return read_io_csv(cfg.plant.replay_csv, cfg.identifier.hyper.n_u,
                       cfg.identifier.hyper.n_y);
  }
  const CartPoleParams& p = cfg.plant.cartpole;
  const ExcitationConfig& ex = cfg.identifier.excitation;
  Vec start_lo = ex.start_lo, start_hi = ex.start_hi;
  if (start_lo.size() != 4 || start_hi.size() != 4) {
    start_lo = (Vec(4) << -2.0, -0.5, -0.25, -0.25).finished();
    start_hi = (Vec(4) << 2.0, 0.5, 0.25, 0.25).finished();
  }
  const double f_lo = 0.05;
  const double f_hi = 0.4 / p.t_sample * 0.5;  // well under Nyquist
  const int n_episodes =
      std::max(1, cfg.identifier.samples / cfg.identifier.episode_len);
  const double u_lo = cfg.nmpc.u_min.size() ? cfg.nmpc.u_min[0] : -100.0;
  const double u_hi = cfg.nmpc.u_max.size() ? cfg.nmpc.u_max[0] : 100.0;

  std::vector<IoEpisode> episodes;
  episodes.reserve(n_episodes);
  for (int e = 0; e < n_episodes; ++e) {
    Rng rng(Rng::derive(cfg.seed, 7000ULL + static_cast<std::uint64_t>(e)));
    Vec x = rng.uniform_vec(start_lo, start_hi);
    std::vector<double> freq(ex.harmonics), phase(ex.harmonics);
    for (int h = 0; h < ex.harmonics; ++h) {
      freq[h] = rng.uniform(f_lo, f_hi);
      phase[h] = rng.uniform(0.0, 6.283185307179586);
    }
    const double amp = ex.amplitude / std::sqrt(std::max(1, ex.harmonics));
    IoEpisode ep;
    for (int k = 0; k < cfg.identifier.episode_len; ++k) {
      double f = 0.0;
      for (int h = 0; h < ex.harmonics; ++h) {
        f += amp * std::sin(6.283185307179586 * freq[h] * k * p.t_sample +
                            phase[h]);
      }
      f += ex.dither * rng.uniform(-1.0, 1.0);
      if (ex.mode == "pd") {
        f += -ex.kp_theta * x[2] - ex.kd_theta * x[3] - ex.kp_z * x[0] -
             ex.kd_z * x[1];
      }
      f = std::clamp(f, u_lo, u_hi);
      ep.u.push_back(Vec::Constant(1, f));
      ep.y.push_back(plant_output(x));
      x = cartpole_step(p, x, f, Vec::Zero(4), cfg.plant.integrator);
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

std::vector<TrainingPair> episodes_to_pairs(const std::vector<IoEpisode>& eps,
                                            const StfHyperParams& hyper) {
  std::vector<TrainingPair> pairs;
  for (const IoEpisode& ep : eps) {
    const int len = static_cast<int>(ep.u.size());
    const int start = std::max(hyper.d_u, hyper.d_y);
    for (int k = start; k < len; ++k) {
      std::vector<Vec> u_hist, y_hist;
      for (int i = 1; i <= hyper.d_u; ++i) u_hist.push_back(ep.u[k - i]);
      for (int i = 1; i <= hyper.d_y; ++i) y_hist.push_back(ep.y[k - i]);
      pairs.push_back(
          TrainingPair{build_regressor(u_hist, y_hist, hyper), ep.y[k]});
    }
  }
  return pairs;
}

std::unique_ptr<PredictionModel> build_nominal_model(
    const ExperimentConfig& cfg,
    std::shared_ptr<const CompositeStfModel>* out_model) {
  if (cfg.nmpc.model == "exact") {
    if (cfg.plant.type != "cartpole") {
      throw ConfigError("nmpc.model 'exact' requires the cartpole plant");
    }
    return std::make_unique<CartPoleModel>(cfg.plant.cartpole,
                                           cfg.plant.integrator);
  }
  auto model = std::make_shared<const CompositeStfModel>(
      load_model(join_path(cfg.out_dir, "model.json")));
  if (out_model) *out_model = model;
  return std::make_unique<StfStateSpace>(model);
}

CostWeights build_weights(const NmpcConfig& cfg, int n, int m, int l) {
  CostWeights w;
  w.q = diag_from(cfg.q_diag, n, "q");
  w.r = diag_from(cfg.r_diag, m, "r");
  w.p_out = diag_from(cfg.p_out_diag, l, "p_out");
  w.q_n = diag_from(cfg.q_n_diag, n, "q_n");
  w.p_n = diag_from(cfg.p_n_diag, l, "p_n");
  w.p_gamma = cfg.p_gamma;
  w.validate(n, m, l);
  return w;
}

SqpSettings build_sqp_settings(const NmpcConfig& cfg) {
  SqpSettings s;
  s.max_iter = cfg.max_iter;
  s.kkt_tol = cfg.kkt_tol;
  s.gamma_min = cfg.gamma_min;
  return s;
}

ScenarioSampler build_scenarios(const ExperimentConfig& cfg,
                                const PredictionModel& model) {
  ScenarioSampler s;
  s.rollout_steps = cfg.policy.rollout_steps;
  s.reference_candidates = cfg.policy.reference_candidates;
  if (s.reference_candidates.empty()) {
    s.reference_candidates.push_back(Vec::Zero(model.output_dim()));
  }
  const int n = model.state_dim();
  if (cfg.policy.scenario_state_lo.size() == n &&
      cfg.policy.scenario_state_hi.size() == n) {
    s.state_lo = cfg.policy.scenario_state_lo;
    s.state_hi = cfg.policy.scenario_state_hi;
    return s;
  }
  // Stacked-state model: tile the input and output boxes over the delay
  // slots [u(k-1)..; y(k)..].
  const auto* stf = dynamic_cast<const StfStateSpace*>(&model);
  if (stf == nullptr) {
    throw ConfigError(
        "policy.scenario_state_lo/hi required for plant-state models");
  }
  const StfHyperParams& h = stf->model().hyper;
  Vec out_lo = cfg.policy.scenario_output_lo;
  Vec out_hi = cfg.policy.scenario_output_hi;
  Vec in_lo = cfg.policy.scenario_input_lo;
  Vec in_hi = cfg.policy.scenario_input_hi;
  if (out_lo.size() != h.n_y || out_hi.size() != h.n_y) {
    throw ConfigError("policy.scenario_output_lo/hi must match the output "
                      "dimension for the identified model");
  }
  if (in_lo.size() != h.n_u || in_hi.size() != h.n_u) {
    in_lo = Vec::Zero(h.n_u);
    in_hi = Vec::Zero(h.n_u);
  }
  s.state_lo = Vec(stacked_state_dim(h));
  s.state_hi = Vec(stacked_state_dim(h));
  int at = 0;
  for (int i = 0; i < h.d_u - 1; ++i) {
    s.state_lo.segment(at, h.n_u) = in_lo;
    s.state_hi.segment(at, h.n_u) = in_hi;
    at += h.n_u;
  }
  for (int i = 0; i < h.d_y; ++i) {
    s.state_lo.segment(at, h.n_y) = out_lo;
    s.state_hi.segment(at, h.n_y) = out_hi;
    at += h.n_y;
  }
  return s;
}

std::vector<Vec> reference_window(const ReferenceSpec& ref, int k, int n) {
  std::vector<Vec> window;
  window.reserve(n + 1);
  for (int i = 0; i <= n; ++i) window.push_back(ref.at(k + i));
  return window;
}

RunReport run_identify(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir);
  RunReport report;
  report.phase = "identify";

  ExperimentConfig local = cfg;
  local.identifier.hyper.n_u = 1;
  local.identifier.hyper.n_y = 2;
  if (cfg.plant.type == "replay") {
    // Channel counts come from the log header for replay sources.
    local.identifier.hyper.n_u = cfg.identifier.hyper.n_u;
    local.identifier.hyper.n_y = cfg.identifier.hyper.n_y;
  }
  const StfHyperParams& hyper = local.identifier.hyper;
  hyper.validate();

  const std::vector<IoEpisode> episodes = collect_identification_data(local);
  write_io_csv(join_path(cfg.out_dir, "io_log.csv"), episodes, hyper.n_u,
               hyper.n_y, cfg.plant.cartpole.t_sample);
  report.artifacts["io_log"] = join_path(cfg.out_dir, "io_log.csv");

  std::vector<TrainingPair> pairs = episodes_to_pairs(episodes, hyper);
  if (pairs.empty()) throw ConfigError("identification produced no pairs");
  const std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(
             static_cast<double>(pairs.size()) *
             local.identifier.train_fraction)));
  std::vector<TrainingPair> train(pairs.begin(), pairs.begin() + n_train);
  std::vector<TrainingPair> valid(pairs.begin() + n_train, pairs.end());
  if (valid.size() < 2) valid = train;

  // Per-channel normalization fitted on the training split only.
  std::vector<Vec> raw_u, raw_y;
  for (const IoEpisode& ep : episodes) {
    for (const Vec& u : ep.u) raw_u.push_back(u);
    for (const Vec& y : ep.y) raw_y.push_back(y);
  }
  const ChannelNormalizer norm_u = fit_normalizer(raw_u);
  const ChannelNormalizer norm_y = fit_normalizer(raw_y);

  CompositeStfModel model =
      CompositeStfModel::create(hyper, local.identifier.evolve);
  model.norm_in = tile_narx_normalizer(norm_u, norm_y, hyper);
  model.norm_out = norm_y;

  TrainOptions opts;
  opts.learning = local.identifier.learning;
  opts.stack_capacity_factor = local.identifier.stack_capacity_factor;
  opts.replace_cadence = local.identifier.replace_cadence;
  opts.epochs = local.identifier.epochs;
  TrainResult result = train_composite_model(std::move(model), train, opts);

  write_training_trace(join_path(cfg.out_dir, "training_trace.csv"),
                       result.trace);
  report.artifacts["training_trace"] =
      join_path(cfg.out_dir, "training_trace.csv");
  save_model(result.model, join_path(cfg.out_dir, "model.json"));
  report.artifacts["model"] = join_path(cfg.out_dir, "model.json");

  // One-step-ahead validation predictions, persisted so the fitting rate is
  // recomputable from the artifact alone.
  const Mat measured = measured_outputs(valid);
  const Mat predicted = predict_pairs(result.model, valid);
  {
    std::vector<std::string> header;
    for (int i = 1; i <= hyper.n_y; ++i) header.push_back("y_" + std::to_string(i));
    for (int i = 1; i <= hyper.n_y; ++i) header.push_back("yhat_" + std::to_string(i));
    CsvWriter w(join_path(cfg.out_dir, "validation_predictions.csv"), header);
    std::vector<double> row;
    for (Eigen::Index r = 0; r < measured.rows(); ++r) {
      row.clear();
      for (Eigen::Index c = 0; c < measured.cols(); ++c) row.push_back(measured(r, c));
      for (Eigen::Index c = 0; c < predicted.cols(); ++c) row.push_back(predicted(r, c));
      w.row(row);
    }
  }
  report.artifacts["validation_predictions"] =
      join_path(cfg.out_dir, "validation_predictions.csv");

  const double bfr = bfr_percent(measured, predicted);
  report.metrics["bfr_percent"] = bfr;
  report.metrics["clusters"] = result.model.cluster_count();
  report.metrics["samples"] = static_cast<double>(pairs.size());
  report.metrics["rank_achieved_step"] =
      static_cast<double>(result.rank_achieved_step);
  report.metrics["updates_applied"] =
      static_cast<double>(result.updates_applied);
  report.ok = bfr >= local.identifier.bfr_floor;
  if (!report.ok) {
    report.notes.push_back(
        "fitting rate below the configured floor; consider more clusters, "
        "longer excitation, or different delays");
  }
  save_report(report, join_path(cfg.out_dir, "report_identify.json"));
  return report;
}

namespace {

struct PipelineContext {
  std::unique_ptr<PredictionModel> model;
  std::shared_ptr<const CompositeStfModel> stf;
  std::optional<BarrierSpec> model_barrier;
  CostWeights weights;
  NmpcSolver solver;
  OcpTemplate ocp;

  PipelineContext(const ExperimentConfig& cfg)
      : solver(build_sqp_settings(cfg.nmpc)) {
    model = build_nominal_model(cfg, &stf);
    model_barrier =
        build_output_barrier(cfg.barrier, model->output_matrix());
    weights = build_weights(cfg.nmpc, model->state_dim(), model->input_dim(),
                            model->output_dim());
    ocp.horizon = cfg.nmpc.horizon;
    ocp.u_min = cfg.nmpc.u_min;
    ocp.u_max = cfg.nmpc.u_max;
    ocp.barrier = model_barrier;
    ocp.bounds = cfg.bounds;
    ocp.weights = weights;
  }
};

}  // namespace

RunReport run_train_policy(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir);
  RunReport report;
  report.phase = "train_policy";

  PipelineContext ctx(cfg);
  const ScenarioSampler scenarios = build_scenarios(cfg, *ctx.model);

  const PolicyDataset dataset =
      collect_dataset(*ctx.model, ctx.solver, ctx.ocp, scenarios,
                      cfg.policy.n_rollouts, Rng::derive(cfg.seed, 11));
  write_policy_dataset(join_path(cfg.out_dir, "dataset.csv"), dataset);
  report.artifacts["dataset"] = join_path(cfg.out_dir, "dataset.csv");
  report.metrics["dataset_samples"] = static_cast<double>(dataset.samples.size());
  report.metrics["dataset_dropped"] =
      static_cast<double>(dataset.dropped_infeasible);

  PolicyTrainOptions topts;
  topts.l_max = cfg.policy.l_max;
  topts.create_threshold = cfg.policy.create_threshold;
  topts.evolve = cfg.policy.evolve;
  topts.train.learning = cfg.policy.learning;
  topts.train.stack_capacity_factor = cfg.policy.stack_capacity_factor;
  topts.train.replace_cadence = cfg.policy.replace_cadence;
  topts.train.epochs = cfg.policy.epochs;
  topts.validation_fraction = cfg.policy.validation_fraction;
  topts.truncate_at_bfr = cfg.policy.truncate_at_bfr;
  topts.u_min = cfg.nmpc.u_min;
  topts.u_max = cfg.nmpc.u_max;
  const PolicyApproximator policy = train_policy(dataset, topts);
  save_policy(policy, join_path(cfg.out_dir, "policy.json"));
  report.artifacts["policy"] = join_path(cfg.out_dir, "policy.json");
  report.metrics["policy_bfr_percent"] = policy.train_bfr;
  report.metrics["policy_clusters"] = policy.stf.cluster_count();

  VerificationConfig vcfg;
  vcfg.epsilon = cfg.policy.epsilon;
  vcfg.kappa = cfg.policy.kappa;
  vcfg.t_sim = cfg.policy.t_sim;
  vcfg.convergence_tol = cfg.policy.convergence_tol;
  vcfg.reference_candidates = scenarios.reference_candidates;
  const VerificationReport verdict =
      probabilistic_verify(policy, *ctx.model, vcfg, Rng::derive(cfg.seed, 13));
  write_verification_report(join_path(cfg.out_dir, "verification.txt"),
                            verdict, vcfg);
  report.artifacts["verification"] = join_path(cfg.out_dir, "verification.txt");
  report.metrics["verify_n_v"] = verdict.n_v;
  report.metrics["verify_failures"] = static_cast<double>(verdict.failures.size());
  report.ok = verdict.pass;
  if (!verdict.pass) {
    report.notes.push_back(
        "probabilistic verification failed; repeat policy learning with "
        "richer scenarios or more data");
  }
  save_report(report, join_path(cfg.out_dir, "report_train_policy.json"));
  return report;
}

RunReport run_verify_policy(const ExperimentConfig& cfg) {
  RunReport report;
  report.phase = "verify_policy";
  PipelineContext ctx(cfg);
  const PolicyApproximator policy =
      load_policy(join_path(cfg.out_dir, "policy.json"));
  VerificationConfig vcfg;
  vcfg.epsilon = cfg.policy.epsilon;
  vcfg.kappa = cfg.policy.kappa;
  vcfg.t_sim = cfg.policy.t_sim;
  vcfg.convergence_tol = cfg.policy.convergence_tol;
  vcfg.reference_candidates = cfg.policy.reference_candidates;
  const VerificationReport verdict = probabilistic_verify(
      policy, *ctx.model, vcfg, Rng::derive(cfg.seed, 13));
  write_verification_report(join_path(cfg.out_dir, "verification.txt"),
                            verdict, vcfg);
  report.artifacts["verification"] = join_path(cfg.out_dir, "verification.txt");
  report.metrics["verify_n_v"] = verdict.n_v;
  report.metrics["verify_failures"] = static_cast<double>(verdict.failures.size());
  report.ok = verdict.pass;
  save_report(report, join_path(cfg.out_dir, "report_verify_policy.json"));
  return report;
}

RunReport run_simulate(const ExperimentConfig& cfg,
                       const std::string& controller) {
  if (controller != "nmpc" && controller != "offline_policy" &&
      controller != "online_adapted") {
    throw ConfigError("unknown controller: " + controller);
  }
  ensure_dir(cfg.out_dir);
  RunReport report;
  report.phase = "simulate_" + controller;

  PipelineContext ctx(cfg);
  const CartPoleParams& plant = cfg.plant.cartpole;
  const CartPoleModel plant_model(plant, cfg.plant.integrator);
  const std::optional<BarrierSpec> plant_barrier =
      build_output_barrier(cfg.barrier, plant_model.output_matrix());

  PolicyApproximator policy;
  std::unique_ptr<OnlineAdapter> adapter;
  const bool needs_policy = controller != "nmpc";
  if (needs_policy) {
    policy = load_policy(join_path(cfg.out_dir, "policy.json"));
  }

  const bool stacked = cfg.nmpc.model == "identified";
  Vec x_plant = cfg.plant.x0;
  StackedStateTracker tracker(
      stacked ? ctx.stf->hyper : StfHyperParams{},
      plant_output(x_plant));

  auto controller_state = [&]() {
    return stacked ? tracker.state() : x_plant;
  };

  Vec adapter_ref;
  if (controller == "online_adapted") {
    adapter_ref = cfg.simulate.reference.at(0);
    const SteadyCost cost = make_steady_cost(
        ctx.weights, ctx.model->output_matrix(), adapter_ref);
    adapter = std::make_unique<OnlineAdapter>(
        policy, *ctx.model, cost, cfg.nmpc.u_min, cfg.nmpc.u_max, cfg.bounds,
        ctx.model_barrier, controller_state(), cfg.adaptation);
  }

  const std::string traj_path =
      join_path(cfg.out_dir, "trajectory_" + controller + ".csv");
  std::vector<std::string> header = {"k"};
  for (int i = 1; i <= 4; ++i) header.push_back("x_" + std::to_string(i));
  header.insert(header.end(), {"u_1", "y_1", "y_2", "r_1", "r_2", "h",
                               "stage_cost", "gamma", "rcbf_residual",
                               "solve_us"});
  CsvWriter traj(traj_path, header);

  OcpSolution warm;
  bool have_warm = false;
  double closed_loop_cost = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
  double max_rcbf_residual = -std::numeric_limits<double>::infinity();
  bool safety_violated = false;
  long soft_fallbacks = 0;
  long not_solved = 0;
  std::vector<double> solve_times;
  std::vector<double> y_err_tail;

  const int n_steps = cfg.simulate.steps;
  for (int k = 0; k < n_steps; ++k) {
    const Vec y_now = plant_output(x_plant);
    const Vec r_now = cfg.simulate.reference.at(k);
    const Vec x_ctrl = controller_state();

    Vec u;
    double gamma = 1.0;
    double rcbf_residual = 0.0;
    const auto t0 = Clock::now();
    if (controller == "nmpc") {
      OcpProblem pb;
      pb.horizon = ctx.ocp.horizon;
      pb.model = ctx.model.get();
      pb.u_min = ctx.ocp.u_min;
      pb.u_max = ctx.ocp.u_max;
      pb.barrier = ctx.ocp.barrier;
      pb.bounds = ctx.ocp.bounds;
      pb.weights = ctx.ocp.weights;
      pb.x0 = x_ctrl;
      pb.reference = reference_window(cfg.simulate.reference, k, pb.horizon);
      const OcpSolution sol = ctx.solver.solve(pb, have_warm ? &warm : nullptr);
      u = sol.u[0];
      gamma = sol.gamma;
      if (pb.barrier.has_value()) {
        rcbf_residual = rcbf_constraint_residual(*pb.barrier, pb.bounds,
                                                 sol.x[0], sol.x[1], sol.gamma);
      }
      if (sol.used_soft_constraints) ++soft_fallbacks;
      if (sol.status != SolveStatus::kSolved) ++not_solved;
      warm = NmpcSolver::shift_warm_start(sol);
      have_warm = true;
    } else if (controller == "offline_policy") {
      u = evaluate_policy(policy, x_ctrl,
                          reference_window(cfg.simulate.reference, k,
                                           policy.layout.horizon));
    } else {
      if ((r_now - adapter_ref).norm() > 0.0) {
        adapter_ref = r_now;
        adapter->set_steady_cost(make_steady_cost(
            ctx.weights, ctx.model->output_matrix(), adapter_ref));
      }
      u = adapter->control(x_ctrl,
                           reference_window(cfg.simulate.reference, k,
                                            policy.layout.horizon));
    }
    const double solve_us = elapsed_us(t0, Clock::now());
    solve_times.push_back(solve_us);

    const double h_val =
        plant_barrier.has_value() ? plant_barrier->h(x_plant) : 0.0;
    if (h_val > 0.0) safety_violated = true;
    min_margin = std::min(min_margin, -h_val);
    max_rcbf_residual = std::max(max_rcbf_residual, rcbf_residual);

    const double stage =
        stage_cost(x_ctrl, u, y_now, r_now, ctx.weights);
    closed_loop_cost += stage;
    if (k >= (3 * n_steps) / 4) {
      y_err_tail.push_back((y_now - r_now).norm());
    }

    traj.row({static_cast<double>(k), x_plant[0], x_plant[1], x_plant[2],
              x_plant[3], u[0], y_now[0], y_now[1], r_now[0], r_now[1], h_val,
              stage, gamma, rcbf_residual, solve_us});

    const Vec w =
        sample_disturbance(cfg.plant.disturbance, 4, k);
    x_plant = cartpole_step(plant, x_plant, u[0], w, cfg.plant.integrator);
    tracker.push(u, plant_output(x_plant));
  }

  if (controller == "online_adapted") {
    write_adaptation_log(join_path(cfg.out_dir, "adaptation_log.csv"),
                         adapter->log());
    report.artifacts["adaptation_log"] =
        join_path(cfg.out_dir, "adaptation_log.csv");
  }

  report.artifacts["trajectory"] = traj_path;
  report.metrics["steps"] = n_steps;
  report.metrics["closed_loop_cost"] = closed_loop_cost;
  report.metrics["min_safety_margin"] = min_margin;
  report.metrics["max_rcbf_residual"] = max_rcbf_residual;
  report.metrics["safety_violated"] = safety_violated ? 1.0 : 0.0;
  report.metrics["soft_fallbacks"] = static_cast<double>(soft_fallbacks);
  report.metrics["unsolved_steps"] = static_cast<double>(not_solved);
  report.metrics["median_step_us"] = median(solve_times);
  double tail_err = 0.0;
  for (double e : y_err_tail) tail_err += e;
  if (!y_err_tail.empty()) tail_err /= static_cast<double>(y_err_tail.size());
  report.metrics["steady_state_error"] = tail_err;
  report.ok = !(cfg.simulate.strict && safety_violated);
  if (safety_violated) report.notes.push_back("safety violation: h(x) > 0");
  save_report(report,
              join_path(cfg.out_dir, "report_simulate_" + controller + ".json"));
  return report;
}

RunReport run_compare(const std::vector<std::string>& report_paths,
                      const std::string& out_dir) {
  if (report_paths.size() < 2) {
    throw ConfigError("compare needs at least two simulate reports");
  }
  ensure_dir(out_dir);
  RunReport report;
  report.phase = "compare";

  struct Entry {
    std::string name;
    RunReport rep;
    CsvTable traj;
  };
  std::vector<Entry> entries;
  for (const std::string& path : report_paths) {
    Entry e;
    e.rep = load_report(path);
    e.name = e.rep.phase;
    const std::string prefix = "simulate_";
    const auto pos = e.name.find(prefix);
    if (pos != std::string::npos) e.name = e.name.substr(pos + prefix.size());
    e.traj = read_csv(e.rep.artifacts.at("trajectory"));
    entries.push_back(std::move(e));
  }
  const std::size_t len = entries[0].traj.rows.size();
  for (const Entry& e : entries) {
    if (e.traj.rows.size() != len) {
      throw ConfigError("compare: trajectory lengths differ");
    }
  }

  CsvWriter table(join_path(out_dir, "comparison.csv"),
                  {"controller_idx", "tracking_percent", "closed_loop_cost",
                   "steady_state_error", "min_safety_margin",
                   "median_step_us"});
  std::vector<std::string> names;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Entry& e = entries[i];
    const Vec r1 = e.traj.col("r_1"), r2 = e.traj.col("r_2");
    const Vec y1 = e.traj.col("y_1"), y2 = e.traj.col("y_2");
    Mat ref(len, 2), out(len, 2);
    ref.col(0) = r1;
    ref.col(1) = r2;
    out.col(0) = y1;
    out.col(1) = y2;
    double tracking = std::numeric_limits<double>::quiet_NaN();
    try {
      tracking = tracking_percent(ref, out);
    } catch (const ArgumentError&) {
      // Constant reference: metric undefined, reported as NaN.
    }
    table.row({static_cast<double>(i), tracking,
               e.rep.metrics.at("closed_loop_cost"),
               e.rep.metrics.at("steady_state_error"),
               e.rep.metrics.at("min_safety_margin"),
               e.rep.metrics.at("median_step_us")});
    names.push_back(e.name);
    report.metrics["median_step_us_" + e.name] =
        e.rep.metrics.at("median_step_us");
  }
  report.artifacts["comparison"] = join_path(out_dir, "comparison.csv");
  for (std::size_t i = 0; i < names.size(); ++i) {
    report.notes.push_back("controller " + std::to_string(i) + ": " +
                           names[i]);
  }

  // Output, input, and margin plots across controllers.
  auto series_of = [&](const char* col) {
    std::vector<SvgSeries> all;
    for (Entry& e : entries) {
      SvgSeries s;
      s.label = e.name;
      const Vec k = e.traj.col("k");
      const Vec v = e.traj.col(col);
      for (Eigen::Index i = 0; i < k.size(); ++i) {
        s.x.push_back(k[i]);
        s.y.push_back(v[i]);
      }
      all.push_back(std::move(s));
    }
    return all;
  };
  write_svg_lines(join_path(out_dir, "outputs_y1.svg"), "output y1",
                  series_of("y_1"));
  write_svg_lines(join_path(out_dir, "outputs_y2.svg"), "output y2",
                  series_of("y_2"));
  write_svg_lines(join_path(out_dir, "inputs.svg"), "input u", series_of("u_1"));
  write_svg_lines(join_path(out_dir, "barrier.svg"), "barrier h(x)",
                  series_of("h"));
  report.artifacts["outputs_y1"] = join_path(out_dir, "outputs_y1.svg");
  report.artifacts["outputs_y2"] = join_path(out_dir, "outputs_y2.svg");
  report.artifacts["inputs"] = join_path(out_dir, "inputs.svg");
  report.artifacts["barrier"] = join_path(out_dir, "barrier.svg");

  save_report(report, join_path(out_dir, "report_compare.json"));
  return report;
}

RunReport run_bench(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir);
  RunReport report;
  report.phase = "bench";

  RunReport nmpc_rep = run_simulate(cfg, "nmpc");
  RunReport adapted_rep = run_simulate(cfg, "online_adapted");

  const CsvTable log =
      read_csv(join_path(cfg.out_dir, "adaptation_log.csv"));
  std::vector<double> named_ops, full_path;
  const int c_eval = log.column("eval_us");
  const int c_comp = log.column("compose_us");
  const int c_tot = log.column("total_us");
  for (const auto& row : log.rows) {
    named_ops.push_back(row[c_eval] + row[c_comp]);
    full_path.push_back(row[c_tot]);
  }
  const double nmpc_us = nmpc_rep.metrics.at("median_step_us");
  const double ops_us = median(named_ops);
  const double full_us = median(full_path);
  report.metrics["nmpc_median_us"] = nmpc_us;
  report.metrics["policy_eval_plus_adapt_median_us"] = ops_us;
  report.metrics["adapted_full_step_median_us"] = full_us;
  report.metrics["speedup_named_ops"] = ops_us > 0.0 ? nmpc_us / ops_us : 0.0;
  report.metrics["speedup_full_path"] = full_us > 0.0 ? nmpc_us / full_us : 0.0;
  report.ok = report.metrics["speedup_named_ops"] >= 10.0;
  save_report(report, join_path(cfg.out_dir, "report_bench.json"));
  return report;
}

}  // namespace dspc
