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

#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "dspc/csv.hpp"

using namespace dspc;

namespace {

std::string mini_config_json(const std::string& out_dir) {
  return R"({
    "seed": 424242,
    "out_dir": ")" + out_dir + R"(",
    "plant": {
      "type": "cartpole",
      "x0": [0.8, 0.0, 0.15, 0.0],
      "disturbance": {"kind": "uniform_box",
                      "half_width": [0.005, 0.005, 0.005, 0.005],
                      "seed": 7}
    },
    "identifier": {
      "d_u": 2, "d_y": 2, "l_max": 3, "create_threshold": 8.0,
      "samples": 900, "episode_len": 30, "epochs": 2, "bfr_floor": 70.0
    },
    "nmpc": {
      "horizon": 4, "model": "exact",
      "q": 1e-4, "r": 1e-3, "p_out": [1.0, 4.0], "q_n": 1e-4,
      "p_n": [2.0, 8.0],
      "p_gamma": 1.0,
      "u_min": [-100.0], "u_max": [100.0]
    },
    "barrier": {"type": "abs_box", "output_coord": 0, "bound": 5.0,
                "eta": 1.0},
    "bounds": {"eps_w": "auto", "eps_s": 0.01, "eps_c": 0.01},
    "policy": {
      "l_max": 4, "create_threshold": 8.0, "n_rollouts": 10,
      "rollout_steps": 15, "epochs": 2,
      "references": [[0.0, 0.0]],
      "scenario_state_lo": [-1.0, -0.4, -0.15, -0.2],
      "scenario_state_hi": [1.0, 0.4, 0.15, 0.2],
      "epsilon": 0.5, "kappa": 0.5, "t_sim": 60, "convergence_tol": 0.4
    },
    "adaptation": {"upsilon": 0.3, "burn_in": 10},
    "simulate": {"steps": 50, "reference": [0.0, 0.0]}
  })";
}

std::string fresh_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("config parsing reports missing and ill-typed fields") {
  CHECK_THROWS_WITH_AS(parse_experiment_config("{"), doctest::Contains("JSON"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_experiment_config("{}"),
                       doctest::Contains("seed"), ConfigError);
  const std::string valid = mini_config_json("/tmp/x");
  // Flip a field to the wrong type.
  std::string bad = valid;
  const auto pos = bad.find("\"horizon\": 4");
  bad.replace(pos, 12, "\"horizon\": \"four\"");
  CHECK_THROWS_WITH_AS(parse_experiment_config(bad),
                       doctest::Contains("horizon"), ConfigError);

  const ExperimentConfig cfg = parse_experiment_config(valid);
  CHECK(cfg.seed == 424242);
  CHECK(cfg.nmpc.horizon == 4);
  CHECK(cfg.barrier.bound == 5.0);
  // eps_w auto-derived from the disturbance box: hw * sqrt(n).
  CHECK(cfg.bounds.eps_w == doctest::Approx(0.005 * 2.0));
}

TEST_CASE("reference window holds constants and applies steps") {
  ReferenceSpec ref;
  ref.value = (Vec(2) << 0.0, 0.0).finished();
  ref.step_to = (Vec(2) << 1.0, 0.0).finished();
  ref.step_at = 5;
  const std::vector<Vec> w = reference_window(ref, 3, 4);
  REQUIRE(w.size() == 5);
  CHECK(w[0][0] == 0.0);  // k = 3
  CHECK(w[1][0] == 0.0);  // k = 4
  CHECK(w[2][0] == 1.0);  // k = 5: step
  CHECK(w[4][0] == 1.0);
}

TEST_CASE("mini pipeline end to end with audit and determinism") {
  const std::string dir_a = fresh_dir("dspc_mini_a");
  ExperimentConfig cfg = parse_experiment_config(mini_config_json(dir_a));

  const RunReport ident = run_identify(cfg);
  CHECK(ident.ok);
  CHECK(ident.metrics.at("bfr_percent") > 70.0);
  CHECK(std::filesystem::exists(dir_a + "/model.json"));
  CHECK(std::filesystem::exists(dir_a + "/io_log.csv"));
  CHECK(std::filesystem::exists(dir_a + "/training_trace.csv"));

  // Fitting rate is recomputable from the persisted predictions.
  {
    const CsvTable preds = read_csv(dir_a + "/validation_predictions.csv");
    Mat y(preds.rows.size(), 2), yhat(preds.rows.size(), 2);
    for (std::size_t r = 0; r < preds.rows.size(); ++r) {
      y(r, 0) = preds.rows[r][0];
      y(r, 1) = preds.rows[r][1];
      yhat(r, 0) = preds.rows[r][2];
      yhat(r, 1) = preds.rows[r][3];
    }
    const double recomputed =
        (1.0 - (y - yhat).norm() /
                   (y.rowwise() - y.colwise().mean()).norm()) *
        100.0;
    CHECK(recomputed ==
          doctest::Approx(ident.metrics.at("bfr_percent")).epsilon(1e-9));
  }

  const RunReport pol = run_train_policy(cfg);
  CHECK(pol.ok);
  CHECK(std::filesystem::exists(dir_a + "/policy.json"));
  CHECK(std::filesystem::exists(dir_a + "/dataset.csv"));
  CHECK(std::filesystem::exists(dir_a + "/verification.txt"));

  const RunReport sim_nmpc = run_simulate(cfg, "nmpc");
  const RunReport sim_policy = run_simulate(cfg, "offline_policy");
  const RunReport sim_adapted = run_simulate(cfg, "online_adapted");
  CHECK(sim_nmpc.metrics.at("safety_violated") == 0.0);
  CHECK(sim_nmpc.metrics.at("soft_fallbacks") == 0.0);

  // Audit: report numbers recomputable from the trajectory CSV.
  for (const RunReport* rep : {&sim_nmpc, &sim_policy, &sim_adapted}) {
    const CsvTable t = read_csv(rep->artifacts.at("trajectory"));
    const Vec stage = t.col("stage_cost");
    CHECK(stage.sum() ==
          doctest::Approx(rep->metrics.at("closed_loop_cost")).epsilon(1e-9));
    const Vec h = t.col("h");
    CHECK((-h.maxCoeff()) ==
          doctest::Approx(rep->metrics.at("min_safety_margin")).epsilon(1e-9));
    const Vec y1 = t.col("y_1"), y2 = t.col("y_2");
    const Vec r1 = t.col("r_1"), r2 = t.col("r_2");
    double tail = 0.0;
    int count = 0;
    const int n = static_cast<int>(t.rows.size());
    for (int k = (3 * n) / 4; k < n; ++k) {
      tail += std::hypot(y1[k] - r1[k], y2[k] - r2[k]);
      ++count;
    }
    tail /= count;
    CHECK(tail ==
          doctest::Approx(rep->metrics.at("steady_state_error")).epsilon(1e-9));
  }

  const RunReport cmp = run_compare(
      {dir_a + "/report_simulate_nmpc.json",
       dir_a + "/report_simulate_offline_policy.json",
       dir_a + "/report_simulate_online_adapted.json"},
      dir_a + "/cmp");
  CHECK(std::filesystem::exists(dir_a + "/cmp/comparison.csv"));
  CHECK(std::filesystem::exists(dir_a + "/cmp/outputs_y1.svg"));

  // Determinism: the full pipeline repeated into a fresh directory produces
  // byte-identical artifacts once wall-time columns are stripped.
  const std::string dir_b = fresh_dir("dspc_mini_b");
  ExperimentConfig cfg_b = parse_experiment_config(mini_config_json(dir_b));
  run_identify(cfg_b);
  run_train_policy(cfg_b);
  run_simulate(cfg_b, "nmpc");
  run_simulate(cfg_b, "online_adapted");

  const std::vector<std::string> time_cols = {"solve_us", "eval_us",
                                              "compose_us", "total_us"};
  for (const char* name :
       {"io_log.csv", "training_trace.csv", "dataset.csv",
        "validation_predictions.csv", "trajectory_nmpc.csv",
        "trajectory_online_adapted.csv", "adaptation_log.csv"}) {
    const std::string a =
        csv_text_without_columns(read_csv(dir_a + "/" + name), time_cols);
    const std::string b =
        csv_text_without_columns(read_csv(dir_b + "/" + name), time_cols);
    CHECK_MESSAGE(a == b, "artifact differs between runs: ", name);
  }
}
