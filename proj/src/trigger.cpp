// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/trigger.hpp"

#include <algorithm>

namespace collsight {

void TriggerConfig::validate() const {
  if (delta_ms <= 0) throw ConfigError("trigger: delta_ms must be > 0");
  if (detect_interval_ms <= 0)
    throw ConfigError("trigger: detect_interval_ms must be > 0");
  if (throughput_drop_factor <= 0 || throughput_drop_factor >= 1)
    throw ConfigError("trigger: throughput_drop_factor must be in (0,1)");
  if (interval_inflation_factor <= 1)
    throw ConfigError("trigger: interval_inflation_factor must be > 1");
  if (max_sampled_ranks < 1)
    throw ConfigError("trigger: max_sampled_ranks must be >= 1");
  if (ema_alpha <= 0 || ema_alpha > 1)
    throw ConfigError("trigger: ema_alpha must be in (0,1]");
  if (warmup_windows < 1)
    throw ConfigError("trigger: warmup_windows must be >= 1");
}

const char* to_string(TriggerKind kind) {
  return kind == TriggerKind::Failure ? "failure" : "straggler";
}

std::vector<RankId> sample_ranks(const Topology& topo, const TriggerConfig& cfg,
                                 std::uint64_t seed) {
  std::vector<const CommGroup*> dp = topo.groups_of_kind(GroupKind::DP);
  const std::size_t cap = static_cast<std::size_t>(cfg.max_sampled_ranks);
  if (dp.size() > cap) {
    // Seeded subset of groups, still one rank per covered group.
    std::sort(dp.begin(), dp.end(), [&](const CommGroup* a, const CommGroup* b) {
      const std::uint64_t ka =
          mix64(seed, static_cast<std::uint64_t>(a->comm_id) | (1ull << 32));
      const std::uint64_t kb =
          mix64(seed, static_cast<std::uint64_t>(b->comm_id) | (1ull << 32));
      if (ka != kb) return ka < kb;
      return a->comm_id < b->comm_id;
    });
    dp.resize(cap);
  }
  std::vector<RankId> sampled;
  sampled.reserve(dp.size());
  for (const CommGroup* g : dp) {
    const std::size_t pick =
        mix64(seed, static_cast<std::uint64_t>(g->comm_id)) % g->members.size();
    sampled.push_back(g->members[pick]);
  }
  std::sort(sampled.begin(), sampled.end());
  sampled.erase(std::unique(sampled.begin(), sampled.end()), sampled.end());
  return sampled;
}

std::optional<TriggerEvent> evaluate(const TraceStore& store,
                                     const std::vector<RankId>& sampled,
                                     TimeMs t, TriggerState& state,
                                     const TriggerConfig& cfg) {
  std::optional<TriggerEvent> tripped;
  for (RankId r : sampled) {
    const RankId ranks[1] = {r};
    const std::vector<TraceRecord> recs =
        store.query(std::span<const RankId>(ranks, 1), t - cfg.delta_ms, t);

    std::vector<const CompletionRecord*> completions;
    bool has_state = false;
    for (const TraceRecord& rec : recs) {
      if (const CompletionRecord* c = rec.completion())
        completions.push_back(c);
      else
        has_state = true;
    }

    const bool had_prev = state.had_records_prev.count(r)
                              ? state.had_records_prev.at(r)
                              : false;
    state.had_records_prev[r] = !recs.empty();

    if (completions.empty()) {
      // Stalled mid-operation, or died outright after having been alive.
      const bool failure = has_state || (recs.empty() && had_prev);
      if (failure && !tripped)
        tripped = TriggerEvent{TriggerKind::Failure, r, t};
      continue;
    }

    double window_bytes = 0;
    std::vector<TimeMs> ends;
    ends.reserve(completions.size());
    for (const CompletionRecord* c : completions) {
      window_bytes += static_cast<double>(c->msg_bytes);
      ends.push_back(c->end_ms);
    }
    std::sort(ends.begin(), ends.end());
    const double throughput = window_bytes / cfg.delta_ms;
    double mean_interval = 0;
    bool interval_defined = false;
    if (ends.size() >= 2) {
      mean_interval = (ends.back() - ends.front()) /
                      static_cast<double>(ends.size() - 1);
      interval_defined = true;
    }

    Baseline& base = state.baselines[r];
    const bool warmed = base.updates >= cfg.warmup_windows;
    bool straggler = false;
    if (warmed && base.throughput > 0 &&
        throughput <= cfg.throughput_drop_factor * base.throughput)
      straggler = true;
    if (warmed && !straggler && interval_defined && base.interval_defined &&
        base.op_interval_ms > 0 &&
        mean_interval >= cfg.interval_inflation_factor * base.op_interval_ms)
      straggler = true;

    if (straggler) {
      if (!tripped) tripped = TriggerEvent{TriggerKind::Straggler, r, t};
      continue;
    }

    base.throughput = base.updates == 0
                          ? throughput
                          : (1 - cfg.ema_alpha) * base.throughput +
                                cfg.ema_alpha * throughput;
    if (interval_defined) {
      base.op_interval_ms = !base.interval_defined
                                ? mean_interval
                                : (1 - cfg.ema_alpha) * base.op_interval_ms +
                                      cfg.ema_alpha * mean_interval;
      base.interval_defined = true;
    }
    base.updates += 1;
  }
  return tripped;
}

}  // namespace collsight
