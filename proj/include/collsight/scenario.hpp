// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "collsight/rca.hpp"
#include "collsight/sim.hpp"
#include "collsight/trigger.hpp"

namespace collsight {

// Everything one run needs, parsed from a single JSON config file and
// validated against every module precondition before any work starts.
struct ScenarioConfig {
  struct Layout {
    int tp = 1;
    int pp = 1;
    int dp = 1;
    int ranks_per_node = 1;
    int channels_per_pair = 1;
    int nics_per_node = 4;
  } layout;

  SimConfig sim;
  std::uint64_t msg_bytes = 64ull * 1024 * 1024;
  TriggerConfig trigger;
  AnalysisConfig analysis;
  std::vector<FaultSpec> faults;

  Topology build_topology() const;
  OpProgram build_program(const Topology& topo) const;
  void validate() const;
};

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario_file(const std::string& path);

}  // namespace collsight
