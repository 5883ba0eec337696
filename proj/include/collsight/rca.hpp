// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <vector>

#include "collsight/program.hpp"
#include "collsight/topology.hpp"
#include "collsight/trace.hpp"
#include "collsight/trigger.hpp"
#include "collsight/types.hpp"

namespace collsight {

enum class RcCategory : std::uint8_t {
  UninitializedOrBlocked,
  RdmaIssueOrReceiverNotReady,
  RdmaIssueOrReceiverFailed,
  GpuIssue,
  StragglerLateStart,
  StragglerLateEnd,
  FlowIncomplete,
  FlowSkewed,
};

enum class Side : std::uint8_t { Local, Remote, Undetermined };

enum class Verdict : std::uint8_t {
  Suspects,
  Undetermined,
  FalseTrigger,
  InsufficientHistory,
  NoStraggler,
};

const char* to_string(RcCategory category);
const char* to_string(Side side);
const char* to_string(Verdict verdict);

struct AnalysisConfig {
  TimeMs straggler_threshold_ms = 1000.0;
  int consecutive_iterations_k = 3;
  TimeMs delta_ms = 200.0;
  double flow_skew_factor = 2.0;  // flow duration vs sibling median

  void validate() const;
};

// Everything the analyzer needs beside the store: the layout, the
// per-iteration program (for dependency reasoning), and its knobs.
struct AnalysisContext {
  const Topology* topo = nullptr;
  const OpProgram* program = nullptr;
  AnalysisConfig cfg;
};

struct SuspectEntry {
  RankId rank = -1;
  RcCategory category = RcCategory::UninitializedOrBlocked;
  Side side = Side::Undetermined;
  CommId group = -1;
  OpSeq stuck_op = -1;   // global op_seq the verdict hangs on
  TimeMs onset_ms = 0;   // last observed progress
};

struct EvidenceRef {
  RankId rank = -1;
  int channel = -1;
  TimeMs time_ms = 0;
  OpSeq op_seq = -1;
};

struct RootCauseReport {
  Verdict verdict = Verdict::Undetermined;
  TriggerEvent trigger;
  std::vector<SuspectEntry> suspects;
  std::vector<SuspectEntry> exonerated;
  std::vector<CommId> affected_groups;
  std::vector<EvidenceRef> evidence;
  std::size_t records_scanned = 0;
};

// Pipeline progress of one rank for one op, counters summed over its flows.
struct ProgressTriple {
  std::uint64_t gpu_ready = 0;
  std::uint64_t rdma_transmitted = 0;
  std::uint64_t rdma_done = 0;
};

// Groups touched by the problem at trigger time: members stuck on an
// incomplete op, or (for stragglers) members consistently late, expanded from
// the trigger rank's groups along program dependencies and shared ranks.
std::vector<CommId> affected_groups(const TraceStore& store,
                                    const AnalysisContext& ctx,
                                    const TriggerEvent& trigger,
                                    std::size_t* scanned = nullptr);

// Ranks whose last op_seq is the strict minimum over the group; empty
// optional when every rank sits on the same op. Ties are co-suspects.
std::optional<std::vector<RankId>> check_min_op(
    const std::vector<std::pair<RankId, OpSeq>>& last_op_per_rank);

// Ranks with minimal pipeline progress, ordered lexicographically by
// (rdma_done, rdma_transmitted, gpu_ready) summed over flows. All ranks come
// back when progress is uniform (whole-group stall).
std::vector<RankId> check_min_data(
    const std::vector<std::pair<RankId, ProgressTriple>>& progress);

// Table-driven classification of one counter snapshot; the optional peer is
// the ring receiver used for the local/remote cross-check.
std::pair<RcCategory, Side> check_rc_table(const ProgressTriple& counters,
                                           const ProgressTriple* peer);
std::pair<RcCategory, Side> check_rc_table(const StateRecord& record,
                                           const StateRecord* peer);

RootCauseReport analyze_failure(const TraceStore& store,
                                const AnalysisContext& ctx,
                                const TriggerEvent& trigger);
RootCauseReport analyze_straggler(const TraceStore& store,
                                  const AnalysisContext& ctx,
                                  const TriggerEvent& trigger);

// Dispatch on the trigger kind.
RootCauseReport analyze(const TraceStore& store, const AnalysisContext& ctx,
                        const TriggerEvent& trigger);

}  // namespace collsight
