// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <vector>

#include "collsight/program.hpp"
#include "collsight/topology.hpp"
#include "collsight/trace.hpp"
#include "collsight/types.hpp"

namespace collsight {

struct SimConfig {
  std::uint64_t chunk_bytes = 4ull * 1024 * 1024;
  double link_bandwidth = 4194304.0;  // bytes per simulated ms, per flow
  double intra_bandwidth = 0.0;       // 0 means 10x link_bandwidth
  double link_latency_ms = 0.05;
  double ack_latency_ms = 0.02;
  double copy_rate = 4194304.0;  // GPU buffer staging, bytes per ms
  double reduce_factor = 1.0;    // reduce cost relative to a plain copy
  double state_log_window_ms = 100.0;
  double max_sim_ms = 60000.0;
  std::uint64_t seed = 0;
  int iterations = 1;
  std::size_t buffer_capacity = 16384;

  double intra_bw() const {
    return intra_bandwidth > 0 ? intra_bandwidth : 10.0 * link_bandwidth;
  }
  void validate() const;
};

enum class FaultKind : std::uint8_t {
  NicShutdown,
  NicBandwidthLimit,
  PcieDowngrade,
  GpuPowerLimit,
  BackgroundCompute,
  BackgroundTraffic,
  ProxyDelay,
};

const char* to_string(FaultKind kind);
bool fault_kind_from_string(std::string_view s, FaultKind& out);

enum class FaultTarget : std::uint8_t { Node, Nic, Rank };

struct FaultSpec {
  FaultKind kind = FaultKind::NicShutdown;
  FaultTarget target = FaultTarget::Node;
  NodeId node = -1;
  int nic = -1;
  RankId rank = -1;
  TimeMs onset_ms = 0;
  double bandwidth_factor = 1.0;
  double copy_factor = 1.0;
  double delay_ms = 0.0;
  double delay_prob = 0.0;
  TimeMs stop_logs_after_ms = 0.0;  // 0: trace generation continues while stuck
};

void validate_faults(const std::vector<FaultSpec>& faults,
                     const Topology& topo);

struct OpSpan {
  TimeMs first_start_ms = -1.0;
  TimeMs last_end_ms = -1.0;
  int completed_ranks = 0;
  int executing_ranks = 0;
};

struct SimSummary {
  bool completed = false;  // every rank finished its whole op list
  TimeMs end_ms = 0;
  std::vector<TimeMs> rank_completion_ms;  // -1 when the rank never finished
  std::map<OpSeq, OpSpan> op_spans;        // keyed by global op_seq
  std::uint64_t events_processed = 0;
  std::uint64_t records_emitted = 0;
};

using RecordSink = std::function<void(const TraceRecord&)>;

// Runs `cfg.iterations` instances of the program over the topology,
// advancing simulated time event by event. Each chunk walks the staging ->
// transmit -> ack pipeline; ring steps gate on the previous hop's ack.
// Deterministic for identical inputs.
SimSummary run_simulation(const Topology& topo, const OpProgram& program,
                          const std::vector<FaultSpec>& faults,
                          const SimConfig& cfg, const RecordSink& sink);

}  // namespace collsight
