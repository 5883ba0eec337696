// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <vector>

#include "collsight/topology.hpp"
#include "collsight/trace.hpp"
#include "collsight/types.hpp"

namespace collsight {

struct TriggerConfig {
  TimeMs delta_ms = 200.0;            // lookback window
  TimeMs detect_interval_ms = 500.0;  // detection cadence
  double throughput_drop_factor = 0.5;
  double interval_inflation_factor = 2.0;
  int max_sampled_ranks = 10;
  double ema_alpha = 0.3;
  int warmup_windows = 3;

  void validate() const;
};

// Per sampled rank: exponential moving averages of normal throughput and
// completion spacing. No comparisons happen before warmup.
struct Baseline {
  double throughput = 0;  // bytes per ms
  double op_interval_ms = 0;
  bool interval_defined = false;
  int updates = 0;
};

enum class TriggerKind : std::uint8_t { Failure, Straggler };

const char* to_string(TriggerKind kind);

struct TriggerEvent {
  TriggerKind kind = TriggerKind::Failure;
  RankId suspect_rank = -1;  // the sampled rank that tripped, not the culprit
  TimeMs time_ms = 0;
};

// Rolling detection state carried across ticks.
struct TriggerState {
  std::map<RankId, Baseline> baselines;
  std::map<RankId, bool> had_records_prev;
};

// One rank per DP group, seeded, never more than max_sampled_ranks. When the
// group count exceeds the cap a seeded subset of groups is covered.
std::vector<RankId> sample_ranks(const Topology& topo, const TriggerConfig& cfg,
                                 std::uint64_t seed);

// One detection tick at time t over the window [t - delta, t]. A sampled rank
// with state records but no completions raises a failure trigger; a warmed
// rank whose throughput halves or completion interval doubles raises a
// straggler trigger; otherwise its baseline absorbs the window. The lowest
// tripped rank wins.
std::optional<TriggerEvent> evaluate(const TraceStore& store,
                                     const std::vector<RankId>& sampled,
                                     TimeMs t, TriggerState& state,
                                     const TriggerConfig& cfg);

}  // namespace collsight
