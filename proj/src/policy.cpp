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

#include "dspc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dspc/csv.hpp"
#include "dspc/metrics.hpp"
#include "dspc/rng.hpp"

namespace dspc {

Vec policy_input(const PolicyInputLayout& layout, const Vec& x,
                 const std::vector<Vec>& ref_window) {
  require_dim(x, layout.n_state, "policy state input");
  if (ref_window.empty()) {
    throw ArgumentError("policy_input: empty reference window");
  }
  Vec z(layout.dim());
  z.head(layout.n_state) = x;
  for (int k = 0; k <= layout.horizon; ++k) {
    // Zero-order hold past the end of the provided window.
    const Vec& r = ref_window[std::min<std::size_t>(k, ref_window.size() - 1)];
    require_dim(r, layout.n_ref, "policy reference entry");
    z.segment(layout.n_state + k * layout.n_ref, layout.n_ref) = r;
  }
  return z;
}

Vec evaluate_policy(const PolicyApproximator& policy, const Vec& x,
                    const std::vector<Vec>& ref_window) {
  const Vec z = policy_input(policy.layout, x, ref_window);
  return clamp(predict_raw(policy.stf, z), policy.u_min, policy.u_max);
}

PolicyDataset collect_dataset(const PredictionModel& nominal,
                              const NmpcSolver& solver,
                              const OcpTemplate& ocp,
                              const ScenarioSampler& scenarios, int n_rollouts,
                              std::uint64_t seed) {
  if (scenarios.reference_candidates.empty()) {
    throw ArgumentError("collect_dataset: no reference candidates");
  }
  PolicyDataset ds;
  ds.layout.n_state = nominal.state_dim();
  ds.layout.n_ref = nominal.output_dim();
  ds.layout.horizon = ocp.horizon;

  for (int rollout = 0; rollout < n_rollouts; ++rollout) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(rollout)));
    Vec x = rng.uniform_vec(scenarios.state_lo, scenarios.state_hi);
    auto pick = [&]() -> const Vec& {
      const auto n = scenarios.reference_candidates.size();
      const auto idx = static_cast<std::size_t>(rng.uniform01() *
                                                static_cast<double>(n));
      return scenarios.reference_candidates[std::min(idx, n - 1)];
    };
    ScenarioSampler::Schedule sched;
    sched.start = pick();
    sched.target = pick();
    // Jump anywhere in the rollout, sometimes past its end (constant case).
    sched.jump_at = static_cast<int>(
        rng.uniform01() * 1.5 * static_cast<double>(scenarios.rollout_steps));

    OcpProblem pb;
    pb.horizon = ocp.horizon;
    pb.model = &nominal;
    pb.u_min = ocp.u_min;
    pb.u_max = ocp.u_max;
    pb.barrier = ocp.barrier;
    pb.bounds = ocp.bounds;
    pb.weights = ocp.weights;

    OcpSolution warm;
    bool have_warm = false;
    for (int k = 0; k < scenarios.rollout_steps; ++k) {
      std::vector<Vec> window;
      window.reserve(ocp.horizon + 1);
      for (int i = 0; i <= ocp.horizon; ++i) window.push_back(sched.at(k + i));
      pb.reference = window;
      pb.x0 = x;
      ++ds.attempted;
      const OcpSolution sol = solver.solve(pb, have_warm ? &warm : nullptr);
      if (sol.status != SolveStatus::kSolved || sol.used_soft_constraints) {
        ++ds.dropped_infeasible;
        break;  // restart from a fresh scenario
      }
      PolicySample sample;
      sample.z = policy_input(ds.layout, x, window);
      sample.u = sol.u[0];
      ds.samples.push_back(std::move(sample));
      x = nominal.step(x, sol.u[0]);
      warm = NmpcSolver::shift_warm_start(sol);
      have_warm = true;
    }
  }
  if (ds.attempted > 0 &&
      10 * ds.dropped_infeasible > ds.attempted) {
    throw NumericalError(
        "collect_dataset: over 10% infeasible labels (" +
        std::to_string(ds.dropped_infeasible) + "/" +
        std::to_string(ds.attempted) +
        "); widen bounds or shrink the scenario box");
  }
  return ds;
}

PolicyApproximator train_policy(const PolicyDataset& dataset,
                                const PolicyTrainOptions& options) {
  if (dataset.samples.empty()) {
    throw ArgumentError("train_policy: empty dataset");
  }
  const int n_z = dataset.layout.dim();
  const int n_u = static_cast<int>(dataset.samples[0].u.size());

  std::vector<TrainingPair> pairs;
  pairs.reserve(dataset.samples.size());
  std::vector<Vec> ins, outs;
  for (const PolicySample& s : dataset.samples) {
    pairs.push_back(TrainingPair{s.z, s.u});
    ins.push_back(s.z);
    outs.push_back(s.u);
  }
  const std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(static_cast<double>(pairs.size()) *
                          (1.0 - options.validation_fraction))));
  std::vector<TrainingPair> train(pairs.begin(), pairs.begin() + n_train);
  std::vector<TrainingPair> valid(pairs.begin() + n_train, pairs.end());
  if (valid.size() < 2) valid = train;

  CompositeStfModel model = CompositeStfModel::create_generic(
      n_z, n_u, options.l_max, options.create_threshold, options.evolve);
  model.norm_in = fit_normalizer(ins);
  model.norm_out = fit_normalizer(outs);

  TrainOptions train_opts = options.train;
  if (options.truncate_at_bfr > 0.0) {
    train_opts.stop_at = options.truncate_at_bfr;
    train_opts.eval = [&valid](const CompositeStfModel& m) {
      return bfr_percent(measured_outputs(valid), predict_pairs(m, valid));
    };
  }
  TrainResult result = train_composite_model(model, train, train_opts);
  if (result.rank_achieved_step < 0) {
    throw NumericalError(
        "train_policy: rank condition never achieved; the scenarios do not "
        "excite the policy inputs enough");
  }

  PolicyApproximator policy;
  policy.stf = std::move(result.model);
  policy.layout = dataset.layout;
  const int m = n_u;
  policy.u_min = options.u_min.size() == m
                     ? options.u_min
                     : Vec::Constant(m, -std::numeric_limits<double>::max());
  policy.u_max = options.u_max.size() == m
                     ? options.u_max
                     : Vec::Constant(m, std::numeric_limits<double>::max());
  policy.train_state_lo = ins[0].head(dataset.layout.n_state);
  policy.train_state_hi = ins[0].head(dataset.layout.n_state);
  for (const Vec& z : ins) {
    policy.train_state_lo =
        policy.train_state_lo.cwiseMin(z.head(dataset.layout.n_state));
    policy.train_state_hi =
        policy.train_state_hi.cwiseMax(z.head(dataset.layout.n_state));
  }
  policy.train_bfr =
      bfr_percent(measured_outputs(valid), predict_pairs(policy.stf, valid));
  return policy;
}

int n_required(double epsilon, double kappa) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ArgumentError("n_required: epsilon must lie in (0,1)");
  }
  if (!(kappa > 0.0 && kappa < 1.0)) {
    throw ArgumentError("n_required: kappa must lie in (0,1)");
  }
  const double bound = std::log(1.0 / kappa) / std::log(1.0 / (1.0 - epsilon));
  return std::max(1, static_cast<int>(std::ceil(bound - 1e-12)));
}

VerificationReport probabilistic_verify(const PolicyApproximator& policy,
                                        const PredictionModel& nominal,
                                        const VerificationConfig& config,
                                        std::uint64_t seed) {
  VerificationReport report;
  report.n_v = n_required(config.epsilon, config.kappa);

  Vec lo = config.operating_lo;
  Vec hi = config.operating_hi;
  if (lo.size() == 0 || hi.size() == 0) {
    const Vec span = policy.train_state_hi - policy.train_state_lo;
    lo = policy.train_state_lo - 0.25 * span;
    hi = policy.train_state_hi + 0.25 * span;
  }
  std::vector<Vec> refs = config.reference_candidates;
  if (refs.empty()) refs.push_back(Vec::Zero(policy.layout.n_ref));
  const Mat c_out = nominal.output_matrix();

  for (int trial = 0; trial < report.n_v; ++trial) {
    Rng rng(Rng::derive(seed, 1000003ULL + static_cast<std::uint64_t>(trial)));
    const Vec x0 =
        rng.uniform_vec(policy.train_state_lo, policy.train_state_hi);
    const std::size_t ref_idx = static_cast<std::size_t>(
        rng.uniform01() * static_cast<double>(refs.size()));
    const Vec r = refs[std::min(ref_idx, refs.size() - 1)];

    Vec x = x0;
    bool ok = true;
    for (int k = 0; k < config.t_sim; ++k) {
      if (((x - hi).array() > 0.0).any() || ((lo - x).array() > 0.0).any()) {
        ok = false;
        break;
      }
      const Vec u = evaluate_policy(policy, x, {r});
      x = nominal.step(x, u);
      if (!x.allFinite()) {
        ok = false;
        break;
      }
    }
    if (ok && (c_out * x - r).norm() > config.convergence_tol) ok = false;
    if (!ok) report.failures.push_back(x0);
  }
  report.pass = report.failures.empty();
  if (report.pass) {
    std::ostringstream os;
    os << "all " << report.n_v
       << " rollouts stable: closed loop converges for a fraction >= "
       << (1.0 - config.epsilon) << " of initial states with confidence >= "
       << (1.0 - config.kappa);
    report.guarantee = os.str();
  }
  return report;
}

void write_policy_dataset(const std::string& path,
                          const PolicyDataset& dataset) {
  if (dataset.samples.empty()) {
    throw ArgumentError("write_policy_dataset: empty dataset");
  }
  std::vector<std::string> header;
  for (int i = 1; i <= dataset.layout.n_state; ++i) {
    header.push_back("x_" + std::to_string(i));
  }
  for (int k = 0; k <= dataset.layout.horizon; ++k) {
    if (dataset.layout.n_ref == 1) {
      header.push_back("r_" + std::to_string(k));
    } else {
      for (int c = 1; c <= dataset.layout.n_ref; ++c) {
        header.push_back("r_" + std::to_string(k) + "_" + std::to_string(c));
      }
    }
  }
  const int n_u = static_cast<int>(dataset.samples[0].u.size());
  for (int i = 1; i <= n_u; ++i) header.push_back("u_" + std::to_string(i));

  CsvWriter writer(path, header);
  std::vector<double> row;
  for (const PolicySample& s : dataset.samples) {
    row.clear();
    for (Eigen::Index i = 0; i < s.z.size(); ++i) row.push_back(s.z[i]);
    for (Eigen::Index i = 0; i < s.u.size(); ++i) row.push_back(s.u[i]);
    writer.row(row);
  }
}

PolicyDataset read_policy_dataset(const std::string& path,
                                  const PolicyInputLayout& layout) {
  const CsvTable table = read_csv(path);
  PolicyDataset ds;
  ds.layout = layout;
  const int n_z = layout.dim();
  const int n_u = static_cast<int>(table.header.size()) - n_z;
  if (n_u < 1) {
    throw ConfigError(path + ": too few columns for the given layout");
  }
  for (const auto& row : table.rows) {
    PolicySample s;
    s.z = Vec(n_z);
    s.u = Vec(n_u);
    for (int i = 0; i < n_z; ++i) s.z[i] = row[i];
    for (int i = 0; i < n_u; ++i) s.u[i] = row[n_z + i];
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void write_verification_report(const std::string& path,
                               const VerificationReport& report,
                               const VerificationConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "verification: " << (report.pass ? "PASS" : "FAIL") << "\n";
  out << "n_v: " << report.n_v << "\n";
  out << "epsilon: " << config.epsilon << "\n";
  out << "kappa: " << config.kappa << "\n";
  out << "t_sim: " << config.t_sim << "\n";
  out << "convergence_tol: " << config.convergence_tol << "\n";
  out << "failures: " << report.failures.size() << "\n";
  for (const Vec& f : report.failures) {
    out << "  x0 = [";
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if (i > 0) out << ", ";
      out << format_full(f[i]);
    }
    out << "]\n";
  }
  if (report.pass) out << "guarantee: " << report.guarantee << "\n";
}

void save_policy(const PolicyApproximator& policy, const std::string& path) {
  nlohmann::json j;
  j["format"] = "dspc-policy";
  j["version"] = 1;
  j["layout"] = {{"n_state", policy.layout.n_state},
                 {"n_ref", policy.layout.n_ref},
                 {"horizon", policy.layout.horizon}};
  auto vec_json = [](const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  j["u_min"] = vec_json(policy.u_min);
  j["u_max"] = vec_json(policy.u_max);
  j["train_state_lo"] = vec_json(policy.train_state_lo);
  j["train_state_hi"] = vec_json(policy.train_state_hi);
  j["train_bfr"] = policy.train_bfr;
  j["model"] = nlohmann::json::parse(model_to_json(policy.stf));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

PolicyApproximator load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy file is not valid JSON: ") +
                      e.what());
  }
  try {
    if (j.at("format") != "dspc-policy" || j.at("version").get<int>() != 1) {
      throw ConfigError("unsupported policy file format/version");
    }
    PolicyApproximator p;
    p.layout.n_state = j.at("layout").at("n_state").get<int>();
    p.layout.n_ref = j.at("layout").at("n_ref").get<int>();
    p.layout.horizon = j.at("layout").at("horizon").get<int>();
    auto vec_from = [](const nlohmann::json& a) {
      Vec v(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) v[i] = a.at(i).get<double>();
      return v;
    };
    p.u_min = vec_from(j.at("u_min"));
    p.u_max = vec_from(j.at("u_max"));
    p.train_state_lo = vec_from(j.at("train_state_lo"));
    p.train_state_hi = vec_from(j.at("train_state_hi"));
    p.train_bfr = j.at("train_bfr").get<double>();
    p.stf = model_from_json(j.at("model").dump());
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy file missing field: ") + e.what());
  }
}

}  // namespace dspc
