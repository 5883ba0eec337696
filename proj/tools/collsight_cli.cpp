// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end over the C API: simulate a scenario, run the
// end-to-end detection loop, or replay analysis over a saved trace.
#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "collsight/collsight.h"

namespace {

int report_error(const char* what, collsight_status status) {
  std::fprintf(stderr, "%s: %s\n", what, collsight_last_error());
  return static_cast<int>(status);
}

struct ScenarioHandle {
  collsight_scenario* ptr = nullptr;
  ~ScenarioHandle() { collsight_scenario_free(ptr); }
};

struct ResultHandle {
  collsight_result* ptr = nullptr;
  ~ResultHandle() { collsight_result_free(ptr); }
};

int load_scenario(const std::string& config, bool has_seed, std::uint64_t seed,
                  ScenarioHandle& scenario) {
  collsight_status status =
      collsight_scenario_load(config.c_str(), &scenario.ptr);
  if (status != COLLSIGHT_OK) return report_error("config error", status);
  if (has_seed) collsight_scenario_set_seed(scenario.ptr, seed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collsight: collective-communication simulator and diagnosis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", collsight_version());

  std::string config_path;
  std::string trace_path;
  std::string out_path;
  std::uint64_t seed = 0;

  auto* sim = app.add_subcommand("simulate", "run a scenario and write a trace");
  sim->add_option("--config", config_path, "scenario config file")->required();
  sim->add_option("--out", out_path, "trace output file")->required();
  auto* sim_seed = sim->add_option("--seed", seed, "seed override");

  auto* e2e = app.add_subcommand(
      "e2e", "simulate with the detection loop and write reports");
  e2e->add_option("--config", config_path, "scenario config file")->required();
  e2e->add_option("--out", out_path, "report output file")->required();
  auto* e2e_seed = e2e->add_option("--seed", seed, "seed override");

  auto* analyze =
      app.add_subcommand("analyze", "replay detection over a saved trace");
  analyze->add_option("--trace", trace_path, "trace input file")->required();
  analyze->add_option("--config", config_path, "scenario config file")
      ->required();
  analyze->add_option("--out", out_path, "report output file")->required();
  auto* analyze_seed = analyze->add_option("--seed", seed, "seed override");

  CLI11_PARSE(app, argc, argv);

  const bool has_seed = sim_seed->count() > 0 || e2e_seed->count() > 0 ||
                        analyze_seed->count() > 0;
  ScenarioHandle scenario;
  if (int rc = load_scenario(config_path, has_seed, seed, scenario); rc != 0)
    return rc;

  ResultHandle result;
  collsight_status status = COLLSIGHT_OK;
  if (sim->parsed()) {
    status = collsight_run_simulate(scenario.ptr, out_path.c_str(), &result.ptr);
    if (status != COLLSIGHT_OK) return report_error("simulate failed", status);
  } else if (e2e->parsed()) {
    status = collsight_run_e2e(scenario.ptr, out_path.c_str(), &result.ptr);
    if (status != COLLSIGHT_OK) return report_error("e2e failed", status);
  } else {
    status = collsight_run_analyze(scenario.ptr, trace_path.c_str(),
                                   out_path.c_str(), &result.ptr);
    if (status != COLLSIGHT_OK) return report_error("analyze failed", status);
  }

  std::fputs(collsight_result_text(result.ptr), stdout);
  std::printf("summary: %s\n", collsight_result_summary_json(result.ptr));
  return 0;
}
