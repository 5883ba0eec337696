// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace collsight {

namespace {

using nlohmann::json;

const json& need(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string(where) + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
void opt(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it != j.end()) out = it->get<T>();
}

FaultSpec parse_fault(const json& j, std::size_t idx) {
  const std::string where = "faults[" + std::to_string(idx) + "]";
  FaultSpec f;
  const std::string kind = need(j, "kind", where.c_str()).get<std::string>();
  if (!fault_kind_from_string(kind, f.kind))
    throw ConfigError(where + ": unknown fault kind '" + kind + "'");
  f.onset_ms = need(j, "onset_ms", where.c_str()).get<double>();

  const bool has_node = j.contains("node");
  const bool has_nic = j.contains("nic");
  const bool has_rank = j.contains("rank");
  if (has_rank) {
    f.target = FaultTarget::Rank;
    f.rank = j.at("rank").get<RankId>();
  } else if (has_nic) {
    f.target = FaultTarget::Nic;
    if (!has_node) throw ConfigError(where + ": nic target needs 'node'");
    f.node = j.at("node").get<NodeId>();
    f.nic = j.at("nic").get<int>();
  } else if (has_node) {
    f.target = FaultTarget::Node;
    f.node = j.at("node").get<NodeId>();
  } else {
    throw ConfigError(where + ": needs a target ('rank', 'node', or 'node'+'nic')");
  }

  opt(j, "bandwidth_factor", f.bandwidth_factor);
  opt(j, "copy_factor", f.copy_factor);
  opt(j, "delay_ms", f.delay_ms);
  opt(j, "delay_prob", f.delay_prob);
  opt(j, "stop_logs_after_ms", f.stop_logs_after_ms);
  return f;
}

}  // namespace

Topology ScenarioConfig::build_topology() const {
  return build_layout(layout.tp, layout.pp, layout.dp, layout.ranks_per_node,
                      layout.channels_per_pair, layout.nics_per_node);
}

OpProgram ScenarioConfig::build_program(const Topology& topo) const {
  return default_program(topo, msg_bytes);
}

void ScenarioConfig::validate() const {
  const Topology topo = build_topology();
  sim.validate();
  trigger.validate();
  analysis.validate();
  if (msg_bytes == 0) throw ConfigError("msg_bytes must be > 0");
  validate_faults(faults, topo);
  validate_program(build_program(topo), topo);
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: not valid JSON");

  ScenarioConfig cfg;
  const json& layout = need(j, "layout", "config");
  cfg.layout.tp = need(layout, "tp", "layout").get<int>();
  cfg.layout.pp = need(layout, "pp", "layout").get<int>();
  cfg.layout.dp = need(layout, "dp", "layout").get<int>();
  cfg.layout.ranks_per_node =
      need(layout, "ranks_per_node", "layout").get<int>();
  cfg.layout.channels_per_pair =
      need(layout, "channels_per_pair", "layout").get<int>();
  opt(layout, "nics_per_node", cfg.layout.nics_per_node);

  if (j.contains("sim")) {
    const json& sim = j.at("sim");
    opt(sim, "chunk_bytes", cfg.sim.chunk_bytes);
    opt(sim, "link_bandwidth", cfg.sim.link_bandwidth);
    opt(sim, "intra_bandwidth", cfg.sim.intra_bandwidth);
    opt(sim, "link_latency_ms", cfg.sim.link_latency_ms);
    opt(sim, "ack_latency_ms", cfg.sim.ack_latency_ms);
    opt(sim, "copy_rate", cfg.sim.copy_rate);
    opt(sim, "reduce_factor", cfg.sim.reduce_factor);
    opt(sim, "state_log_window_ms", cfg.sim.state_log_window_ms);
    opt(sim, "max_sim_ms", cfg.sim.max_sim_ms);
    opt(sim, "buffer_capacity", cfg.sim.buffer_capacity);
  }
  opt(j, "msg_bytes", cfg.msg_bytes);
  cfg.sim.iterations = need(j, "iterations", "config").get<int>();
  cfg.sim.seed = need(j, "seed", "config").get<std::uint64_t>();

  // Unless set explicitly, the detection lookback is two state-log windows
  // and the analysis window follows it.
  cfg.trigger.delta_ms = 2.0 * cfg.sim.state_log_window_ms;
  if (j.contains("trigger")) {
    const json& trig = j.at("trigger");
    opt(trig, "delta_ms", cfg.trigger.delta_ms);
    opt(trig, "detect_interval_ms", cfg.trigger.detect_interval_ms);
    opt(trig, "throughput_drop_factor", cfg.trigger.throughput_drop_factor);
    opt(trig, "interval_inflation_factor",
        cfg.trigger.interval_inflation_factor);
    opt(trig, "max_sampled_ranks", cfg.trigger.max_sampled_ranks);
    opt(trig, "ema_alpha", cfg.trigger.ema_alpha);
    opt(trig, "warmup_windows", cfg.trigger.warmup_windows);
  }
  cfg.analysis.delta_ms = cfg.trigger.delta_ms;
  if (j.contains("analysis")) {
    const json& ana = j.at("analysis");
    opt(ana, "straggler_threshold_ms", cfg.analysis.straggler_threshold_ms);
    opt(ana, "consecutive_iterations_k", cfg.analysis.consecutive_iterations_k);
    opt(ana, "delta_ms", cfg.analysis.delta_ms);
    opt(ana, "flow_skew_factor", cfg.analysis.flow_skew_factor);
  }
  if (j.contains("faults")) {
    const json& faults = j.at("faults");
    if (!faults.is_array()) throw ConfigError("config: 'faults' must be a list");
    for (std::size_t i = 0; i < faults.size(); ++i)
      cfg.faults.push_back(parse_fault(faults[i], i));
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace collsight
