// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/collsight.h"

#include <new>
#include <string>

#include "collsight/runner.hpp"
#include "collsight/scenario.hpp"
#include "collsight/trace.hpp"

using namespace collsight;

struct collsight_scenario {
  ScenarioConfig cfg;
};

struct collsight_result {
  std::string text;
  std::string summary_json;
  std::string reports_jsonl;
  std::uint64_t triggers = 0;
};

namespace {

thread_local std::string g_last_error;

collsight_status fail(collsight_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
collsight_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    return fail(COLLSIGHT_ERR_CONFIG, e.what());
  } catch (const TraceParseError& e) {
    return fail(COLLSIGHT_ERR_TRACE_PARSE, e.what());
  } catch (const std::exception& e) {
    return fail(COLLSIGHT_ERR_RUNTIME, e.what());
  }
}

collsight_result* make_result(const RunResult& run, const ScenarioConfig& cfg,
                              bool with_reports) {
  auto* res = new collsight_result;
  res->summary_json = summary_to_json(run);
  res->triggers = run.outcomes.size();
  if (with_reports) {
    res->reports_jsonl = reports_to_jsonl(run.outcomes, cfg);
    res->text = reports_to_text(run.outcomes, cfg) + summary_to_text(run);
  } else {
    res->text = summary_to_text(run);
  }
  return res;
}

}  // namespace

extern "C" {

const char* collsight_version(void) { return "0.1.0"; }

const char* collsight_last_error(void) { return g_last_error.c_str(); }

collsight_status collsight_scenario_load(const char* path,
                                         collsight_scenario** out) {
  if (!path || !out) return fail(COLLSIGHT_ERR_ARG, "null argument");
  return guarded([&] {
    auto* handle = new collsight_scenario{load_scenario_file(path)};
    *out = handle;
    return COLLSIGHT_OK;
  });
}

collsight_status collsight_scenario_parse(const char* json_text,
                                          collsight_scenario** out) {
  if (!json_text || !out) return fail(COLLSIGHT_ERR_ARG, "null argument");
  return guarded([&] {
    auto* handle = new collsight_scenario{parse_scenario(json_text)};
    *out = handle;
    return COLLSIGHT_OK;
  });
}

collsight_status collsight_scenario_set_seed(collsight_scenario* scenario,
                                             uint64_t seed) {
  if (!scenario) return fail(COLLSIGHT_ERR_ARG, "null scenario");
  scenario->cfg.sim.seed = seed;
  return COLLSIGHT_OK;
}

void collsight_scenario_free(collsight_scenario* scenario) { delete scenario; }

collsight_status collsight_run_simulate(const collsight_scenario* scenario,
                                        const char* trace_out_path,
                                        collsight_result** out) {
  if (!scenario || !out) return fail(COLLSIGHT_ERR_ARG, "null argument");
  return guarded([&] {
    RunResult run = run_simulate(scenario->cfg);
    if (trace_out_path)
      write_file(trace_out_path, serialize_records(run.records));
    *out = make_result(run, scenario->cfg, /*with_reports=*/false);
    return COLLSIGHT_OK;
  });
}

collsight_status collsight_run_e2e(const collsight_scenario* scenario,
                                   const char* report_out_path,
                                   collsight_result** out) {
  if (!scenario || !out) return fail(COLLSIGHT_ERR_ARG, "null argument");
  return guarded([&] {
    RunResult run = run_e2e(scenario->cfg);
    if (report_out_path)
      write_file(report_out_path, reports_to_jsonl(run.outcomes, scenario->cfg));
    *out = make_result(run, scenario->cfg, /*with_reports=*/true);
    return COLLSIGHT_OK;
  });
}

collsight_status collsight_run_analyze(const collsight_scenario* scenario,
                                       const char* trace_in_path,
                                       const char* report_out_path,
                                       collsight_result** out) {
  if (!scenario || !trace_in_path || !out)
    return fail(COLLSIGHT_ERR_ARG, "null argument");
  return guarded([&] {
    const std::vector<TraceRecord> records = load_trace_file(trace_in_path);
    RunResult run = run_analyze(records, scenario->cfg);
    if (report_out_path)
      write_file(report_out_path, reports_to_jsonl(run.outcomes, scenario->cfg));
    *out = make_result(run, scenario->cfg, /*with_reports=*/true);
    return COLLSIGHT_OK;
  });
}

const char* collsight_result_text(const collsight_result* result) {
  return result ? result->text.c_str() : "";
}

const char* collsight_result_summary_json(const collsight_result* result) {
  return result ? result->summary_json.c_str() : "";
}

const char* collsight_result_reports_jsonl(const collsight_result* result) {
  return result ? result->reports_jsonl.c_str() : "";
}

uint64_t collsight_result_trigger_count(const collsight_result* result) {
  return result ? result->triggers : 0;
}

void collsight_result_free(collsight_result* result) { delete result; }

}  // extern "C"
