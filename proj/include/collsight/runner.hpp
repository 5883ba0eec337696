// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "collsight/rca.hpp"
#include "collsight/scenario.hpp"
#include "collsight/sim.hpp"
#include "collsight/trigger.hpp"

namespace collsight {

// One detection tick that tripped: the trigger plus the analysis verdict.
struct DetectionOutcome {
  TriggerEvent trigger;
  RootCauseReport report;
};

struct RunResult {
  SimSummary summary;
  std::vector<TraceRecord> records;
  std::vector<DetectionOutcome> outcomes;
  std::vector<RankId> sampled;
};

// Simulation through the ring-buffer/drain pipeline; records land in the
// returned vector in emission order.
RunResult run_simulate(const ScenarioConfig& cfg);

// Detection loop over a record set: every detect_interval of simulated time,
// evaluate the sampled ranks against the window and analyze any trigger.
// Detection is read-only, so running it after the simulation is the same
// deterministic interleaving the simulated clock would produce.
std::vector<DetectionOutcome> run_detection(const std::vector<TraceRecord>& records,
                                            const Topology& topo,
                                            const OpProgram& program,
                                            const ScenarioConfig& cfg,
                                            std::vector<RankId>* sampled_out);

// Simulate + detect.
RunResult run_e2e(const ScenarioConfig& cfg);

// Replay detection over a saved trace. Yields the same structured reports as
// the e2e run that produced the trace.
RunResult run_analyze(const std::vector<TraceRecord>& records,
                      const ScenarioConfig& cfg);

// Line-delimited structured report stream (one trigger line and one report
// line per outcome), and the human-readable rendering.
std::string reports_to_jsonl(const std::vector<DetectionOutcome>& outcomes,
                             const ScenarioConfig& cfg);
std::string reports_to_text(const std::vector<DetectionOutcome>& outcomes,
                            const ScenarioConfig& cfg);
std::string summary_to_json(const RunResult& result);
std::string summary_to_text(const RunResult& result);

void write_file(const std::string& path, const std::string& content);

}  // namespace collsight
