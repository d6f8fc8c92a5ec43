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

#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "dspc/metrics.hpp"
#include "support.hpp"

using namespace dspc;

namespace {

Vec vec1(double a) { return Vec::Constant(1, a); }

// Stable scalar plant x+ = 0.7 x + u used as the nominal model.
test::LinearTestModel stable_model() {
  return test::LinearTestModel((Mat(1, 1) << 0.7).finished(),
                               (Mat(1, 1) << 1.0).finished(),
                               Mat::Identity(1, 1));
}

OcpTemplate scalar_ocp() {
  OcpTemplate t;
  t.horizon = 3;
  t.u_min = vec1(-4.0);
  t.u_max = vec1(4.0);
  t.weights = CostWeights::diagonal(1, 1, 1, 1e-6, 0.05, 1.0, 1e-6, 1.0, 1.0);
  return t;
}

ScenarioSampler scalar_scenarios() {
  ScenarioSampler s;
  s.state_lo = vec1(-1.5);
  s.state_hi = vec1(1.5);
  s.reference_candidates = {vec1(0.0), vec1(0.5)};
  s.rollout_steps = 12;
  return s;
}

}  // namespace

TEST_CASE("n_required: sample-count arithmetic") {
  CHECK(n_required(0.01, 0.01) == 459);
  CHECK(n_required(0.5, 0.5) == 1);
  CHECK(n_required(0.2, 0.999999) == 1);  // degenerate confidence floor
  CHECK(n_required(0.05, 0.01) == 90);
  CHECK_THROWS_AS(n_required(0.0, 0.5), ArgumentError);
  CHECK_THROWS_AS(n_required(0.5, 1.0), ArgumentError);
}

TEST_CASE("n_required is nonincreasing in epsilon and kappa") {
  int last = n_required(0.01, 0.3);
  for (double eps : {0.02, 0.05, 0.1, 0.3, 0.6}) {
    const int n = n_required(eps, 0.3);
    CHECK(n <= last);
    last = n;
  }
  last = n_required(0.1, 0.01);
  for (double kappa : {0.05, 0.1, 0.4, 0.9}) {
    const int n = n_required(0.1, kappa);
    CHECK(n <= last);
    last = n;
  }
}

TEST_CASE("policy_input applies zero-order hold") {
  PolicyInputLayout layout{2, 1, 3};
  const Vec x = (Vec(2) << 5.0, -1.0).finished();
  const Vec z = policy_input(layout, x, {vec1(1.0), vec1(2.0)});
  REQUIRE(z.size() == 6);
  CHECK(z[0] == 5.0);
  CHECK(z[1] == -1.0);
  CHECK(z[2] == 1.0);
  CHECK(z[3] == 2.0);
  CHECK(z[4] == 2.0);  // held
  CHECK(z[5] == 2.0);
}

TEST_CASE("bfr hand values") {
  Mat y(3, 1), yhat(3, 1);
  y << 0, 1, 2;
  yhat = y;
  CHECK(bfr_percent(y, yhat) == doctest::Approx(100.0));
  yhat.setConstant(1.0);  // the mean
  CHECK(bfr_percent(y, yhat) == doctest::Approx(0.0));

  Mat y2(2, 1), yh2(2, 1);
  y2 << 0, 2;
  yh2 << 1, 1;
  CHECK(bfr_percent(y2, yh2) == doctest::Approx(0.0));

  Mat constant(4, 1);
  constant.setConstant(3.0);
  CHECK_THROWS_AS(bfr_percent(constant, constant), ArgumentError);
}

TEST_CASE("collect_dataset: determinism and emptiness") {
  test::LinearTestModel model = stable_model();
  NmpcSolver solver;
  const OcpTemplate ocp = scalar_ocp();
  const ScenarioSampler scen = scalar_scenarios();

  const PolicyDataset empty = collect_dataset(model, solver, ocp, scen, 0, 9);
  CHECK(empty.samples.empty());

  const PolicyDataset a = collect_dataset(model, solver, ocp, scen, 5, 9);
  const PolicyDataset b = collect_dataset(model, solver, ocp, scen, 5, 9);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.samples.size() == 5u * 12u);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK((a.samples[i].z - b.samples[i].z).norm() == 0.0);
    CHECK((a.samples[i].u - b.samples[i].u).norm() == 0.0);
  }
}

TEST_CASE("dataset labels are reproducible through the solver") {
  test::LinearTestModel model = stable_model();
  NmpcSolver solver;
  const OcpTemplate ocp = scalar_ocp();
  const PolicyDataset ds =
      collect_dataset(model, solver, ocp, scalar_scenarios(), 2, 17);
  REQUIRE(!ds.samples.empty());
  for (std::size_t i = 0; i < 6; ++i) {
    const PolicySample& s = ds.samples[i * 3];
    OcpProblem pb;
    pb.horizon = ocp.horizon;
    pb.model = &model;
    pb.u_min = ocp.u_min;
    pb.u_max = ocp.u_max;
    pb.weights = ocp.weights;
    pb.x0 = s.z.head(1);
    // The sample's reference window is embedded in z after the state block.
    pb.reference.clear();
    for (int k = 0; k <= ocp.horizon; ++k) {
      pb.reference.push_back(s.z.segment(1 + k, 1));
    }
    const OcpSolution sol = solver.solve(pb);
    CHECK(std::abs(sol.u[0][0] - s.u[0]) <= 1e-8);
  }
}

TEST_CASE("train_policy represents a linear policy almost exactly") {
  test::LinearTestModel model = stable_model();
  NmpcSolver solver;
  const PolicyDataset ds =
      collect_dataset(model, solver, scalar_ocp(), scalar_scenarios(), 40, 3);
  PolicyTrainOptions opts;
  opts.l_max = 1;
  opts.create_threshold = 1e9;
  opts.train.epochs = 4;
  opts.u_min = vec1(-4.0);
  opts.u_max = vec1(4.0);
  const PolicyApproximator policy = train_policy(ds, opts);
  CHECK(policy.train_bfr >= 99.0);
  CHECK(policy.stf.cluster_count() == 1);

  // Evaluation stays inside the box.
  const Vec u = evaluate_policy(policy, vec1(1e6), {vec1(0.0)});
  CHECK(u[0] <= 4.0);
  CHECK(u[0] >= -4.0);
}

TEST_CASE("train_policy rejects degenerate datasets") {
  PolicyDataset ds;
  ds.layout = PolicyInputLayout{1, 1, 3};
  PolicySample s;
  s.z = (Vec(5) << 1, 0, 0, 0, 0).finished();
  s.u = vec1(0.3);
  for (int i = 0; i < 50; ++i) ds.samples.push_back(s);  // one repeated point
  PolicyTrainOptions opts;
  opts.l_max = 2;
  CHECK_THROWS_AS(train_policy(ds, opts), NumericalError);

  PolicyDataset empty;
  empty.layout = ds.layout;
  CHECK_THROWS_AS(train_policy(empty, opts), ArgumentError);
}

TEST_CASE("probabilistic_verify passes a stabilizing policy and fails an "
          "unstable loop") {
  // Hand-built linear policy u = -0.5 x on x+ = 0.7 x + u: closed loop 0.2.
  PolicyApproximator policy;
  policy.stf = CompositeStfModel::create_generic(2, 1, 1, 1e9);
  Cluster c;
  c.centroid = Vec::Zero(3);
  c.xi = Mat::Identity(3, 3);
  c.lambda = Mat::Identity(1, 1);
  policy.stf.clusters.push_back(c);
  policy.stf.locals.push_back(
      LocalLinearModel{(Mat(1, 2) << -0.5, 0.0).finished(), Vec::Zero(1)});
  policy.layout = PolicyInputLayout{1, 1, 0};
  policy.u_min = vec1(-10.0);
  policy.u_max = vec1(10.0);
  policy.train_state_lo = vec1(-1.0);
  policy.train_state_hi = vec1(1.0);

  test::LinearTestModel model = stable_model();
  VerificationConfig cfg;
  cfg.epsilon = 0.05;
  cfg.kappa = 0.05;
  cfg.t_sim = 60;
  cfg.convergence_tol = 1e-3;
  const VerificationReport pass = probabilistic_verify(policy, model, cfg, 5);
  CHECK(pass.pass);
  CHECK(pass.n_v == n_required(0.05, 0.05));
  CHECK(pass.guarantee.find("0.95") != std::string::npos);

  // Zero policy on an unstable model diverges.
  PolicyApproximator zero = policy;
  zero.stf.locals[0].a.setZero();
  test::LinearTestModel unstable((Mat(1, 1) << 1.3).finished(),
                                 (Mat(1, 1) << 1.0).finished(),
                                 Mat::Identity(1, 1));
  const VerificationReport fail = probabilistic_verify(zero, unstable, cfg, 5);
  CHECK_FALSE(fail.pass);
  CHECK_FALSE(fail.failures.empty());
}

TEST_CASE("policy dataset and policy files round trip") {
  test::LinearTestModel model = stable_model();
  NmpcSolver solver;
  const PolicyDataset ds =
      collect_dataset(model, solver, scalar_ocp(), scalar_scenarios(), 3, 21);
  const std::string dir =
      (std::filesystem::temp_directory_path() / "dspc_policy_test").string();
  std::filesystem::create_directories(dir);
  const std::string csv = dir + "/dataset.csv";
  write_policy_dataset(csv, ds);
  const PolicyDataset back = read_policy_dataset(csv, ds.layout);
  REQUIRE(back.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK((back.samples[i].z - ds.samples[i].z).norm() <= 1e-15);
    CHECK((back.samples[i].u - ds.samples[i].u).norm() <= 1e-15);
  }

  PolicyTrainOptions opts;
  opts.l_max = 1;
  opts.u_min = vec1(-4.0);
  opts.u_max = vec1(4.0);
  const PolicyApproximator policy = train_policy(ds, opts);
  const std::string pj = dir + "/policy.json";
  save_policy(policy, pj);
  const PolicyApproximator loaded = load_policy(pj);
  CHECK(loaded.layout.n_state == policy.layout.n_state);
  CHECK(loaded.train_bfr == doctest::Approx(policy.train_bfr));
  const Vec probe = vec1(0.4);
  CHECK((evaluate_policy(loaded, probe, {vec1(0.0)}) -
         evaluate_policy(policy, probe, {vec1(0.0)}))
            .norm() <= 1e-14);
}
