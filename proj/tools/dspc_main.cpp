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

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dspc/harness.hpp"

namespace {

// Exit codes: 0 ok, 1 phase failure, 2 config error, 3 verification fail,
// 4 safety violation under --strict.
constexpr int kExitOk = 0;
constexpr int kExitPhaseFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerifyFail = 3;
constexpr int kExitSafety = 4;

dspc::ExperimentConfig load_config(const std::string& path,
                                   std::uint64_t seed_override,
                                   bool has_seed,
                                   const std::string& out_override) {
  dspc::ExperimentConfig cfg = dspc::load_experiment_config(path);
  if (has_seed) cfg.seed = seed_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  return cfg;
}

void print_metrics(const dspc::RunReport& report) {
  std::printf("phase: %s (%s)\n", report.phase.c_str(),
              report.ok ? "ok" : "FAILED");
  for (const auto& [key, value] : report.metrics) {
    std::printf("  %-32s %.6g\n", key.c_str(), value);
  }
  for (const auto& note : report.notes) {
    std::printf("  note: %s\n", note.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-driven safe predictive control pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string controller = "nmpc";
  bool strict = false;
  std::vector<std::string> reports;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config) {
      sub->add_option("--config", config_path, "experiment config file")
          ->required();
    }
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--seed", seed, "seed override")
        ->each([&](const std::string&) { has_seed = true; });
  };

  CLI::App* identify = app.add_subcommand("identify", "offline system identification");
  add_common(identify);
  CLI::App* train = app.add_subcommand("train-policy", "learn and verify the control policy");
  add_common(train);
  CLI::App* verify = app.add_subcommand("verify-policy", "re-run probabilistic verification");
  add_common(verify);
  CLI::App* simulate = app.add_subcommand("simulate", "closed loop on the true plant");
  add_common(simulate);
  simulate->add_option("--controller", controller,
                       "nmpc | offline_policy | online_adapted");
  simulate->add_flag("--strict", strict, "safety violations exit nonzero");
  CLI::App* compare = app.add_subcommand("compare", "tabulate and plot simulate reports");
  compare->add_option("reports", reports, "simulate report JSON files")
      ->required();
  compare->add_option("--out", out_dir, "output directory");
  CLI::App* bench = app.add_subcommand("bench", "per-step timing comparison");
  add_common(bench);

  CLI11_PARSE(app, argc, argv);

  try {
    dspc::RunReport report;
    if (app.got_subcommand(identify)) {
      report = dspc::run_identify(
          load_config(config_path, seed, has_seed, out_dir));
      print_metrics(report);
      return report.ok ? kExitOk : kExitPhaseFail;
    }
    if (app.got_subcommand(train)) {
      report = dspc::run_train_policy(
          load_config(config_path, seed, has_seed, out_dir));
      print_metrics(report);
      return report.ok ? kExitOk : kExitVerifyFail;
    }
    if (app.got_subcommand(verify)) {
      report = dspc::run_verify_policy(
          load_config(config_path, seed, has_seed, out_dir));
      print_metrics(report);
      return report.ok ? kExitOk : kExitVerifyFail;
    }
    if (app.got_subcommand(simulate)) {
      dspc::ExperimentConfig cfg =
          load_config(config_path, seed, has_seed, out_dir);
      if (strict) cfg.simulate.strict = true;
      report = dspc::run_simulate(cfg, controller);
      print_metrics(report);
      if (cfg.simulate.strict && report.metrics.at("safety_violated") > 0.0) {
        return kExitSafety;
      }
      return kExitOk;
    }
    if (app.got_subcommand(compare)) {
      report = dspc::run_compare(reports, out_dir.empty() ? "." : out_dir);
      print_metrics(report);
      return kExitOk;
    }
    if (app.got_subcommand(bench)) {
      report = dspc::run_bench(
          load_config(config_path, seed, has_seed, out_dir));
      print_metrics(report);
      return report.ok ? kExitOk : kExitPhaseFail;
    }
  } catch (const dspc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dspc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPhaseFail;
  }
  return kExitConfig;
}
