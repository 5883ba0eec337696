// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/rca.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace collsight {

const char* to_string(RcCategory category) {
  switch (category) {
    case RcCategory::UninitializedOrBlocked:
      return "uninitialized_or_blocked";
    case RcCategory::RdmaIssueOrReceiverNotReady:
      return "rdma_issue_or_receiver_not_ready";
    case RcCategory::RdmaIssueOrReceiverFailed:
      return "rdma_issue_or_receiver_failed";
    case RcCategory::GpuIssue:
      return "gpu_issue";
    case RcCategory::StragglerLateStart:
      return "straggler_late_start";
    case RcCategory::StragglerLateEnd:
      return "straggler_late_end";
    case RcCategory::FlowIncomplete:
      return "flow_incomplete";
    case RcCategory::FlowSkewed:
      return "flow_skewed";
  }
  return "?";
}

const char* to_string(Side side) {
  switch (side) {
    case Side::Local:
      return "local";
    case Side::Remote:
      return "remote";
    case Side::Undetermined:
      return "undetermined";
  }
  return "?";
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Suspects:
      return "suspects";
    case Verdict::Undetermined:
      return "undetermined";
    case Verdict::FalseTrigger:
      return "false_trigger";
    case Verdict::InsufficientHistory:
      return "insufficient_history";
    case Verdict::NoStraggler:
      return "no_straggler";
  }
  return "?";
}

void AnalysisConfig::validate() const {
  if (straggler_threshold_ms <= 0)
    throw ConfigError("analysis: straggler_threshold_ms must be > 0");
  if (consecutive_iterations_k < 1)
    throw ConfigError("analysis: consecutive_iterations_k must be >= 1");
  if (delta_ms <= 0) throw ConfigError("analysis: delta_ms must be > 0");
  if (flow_skew_factor <= 1)
    throw ConfigError("analysis: flow_skew_factor must be > 1");
}

namespace {

// Per-rank views over the store, records already in time order per rank
// because emission is time ordered.
struct RankIndex {
  std::unordered_map<RankId, std::vector<std::size_t>> by_rank;

  RankIndex(const TraceStore& store, std::size_t* scanned) {
    for (std::size_t i = 0; i < store.size(); ++i)
      by_rank[store.at(i).rank()].push_back(i);
    if (scanned) *scanned += store.size();
  }

  const std::vector<std::size_t>* of(RankId r) const {
    auto it = by_rank.find(r);
    return it == by_rank.end() ? nullptr : &it->second;
  }
};

// Materialized dependency reachability over the executed program instances:
// explicit depends_on edges plus each rank's sequential order.
struct DepIndex {
  const OpProgram* program = nullptr;
  OpSeq opn = 0;
  std::unordered_map<OpSeq, std::vector<OpSeq>> parents;

  DepIndex(const AnalysisContext& ctx, int max_iteration) {
    program = ctx.program;
    opn = static_cast<OpSeq>(program->ops.size());
    if (opn == 0) return;
    std::unordered_map<RankId, OpSeq> prev;
    for (int iter = 0; iter <= max_iteration; ++iter) {
      for (const CollOpSpec& op : program->ops) {
        const OpSeq global = static_cast<OpSeq>(iter) * opn + op.op_seq;
        auto& par = parents[global];
        for (OpSeq dep : op.depends_on)
          par.push_back(static_cast<OpSeq>(iter) * opn + dep);
        for (RankId r : executing_ranks(op, *ctx.topo)) {
          auto it = prev.find(r);
          if (it != prev.end() &&
              std::find(par.begin(), par.end(), it->second) == par.end())
            par.push_back(it->second);
          prev[r] = global;
        }
      }
    }
  }

  // True when `upstream` lies in the transitive dependency closure of
  // `downstream`.
  bool depends_on(OpSeq downstream, OpSeq upstream) const {
    if (downstream == upstream) return false;
    std::unordered_set<OpSeq> visited;
    std::deque<OpSeq> frontier{downstream};
    while (!frontier.empty()) {
      const OpSeq cur = frontier.front();
      frontier.pop_front();
      auto it = parents.find(cur);
      if (it == parents.end()) continue;
      for (OpSeq p : it->second) {
        if (p == upstream) return true;
        if (visited.insert(p).second) frontier.push_back(p);
      }
    }
    return false;
  }
};

struct LastLog {
  RankId rank = -1;
  std::size_t index = 0;  // into store
};

std::vector<LastLog> last_logs_of_group(const TraceStore& store,
                                        const RankIndex& index,
                                        const CommGroup& group, TimeMs t) {
  std::vector<LastLog> out;
  for (RankId r : group.members) {
    const std::vector<std::size_t>* recs = index.of(r);
    if (!recs) continue;
    bool found = false;
    std::size_t best = 0;
    for (std::size_t i : *recs) {
      if (store.at(i).timestamp() > t) break;
      best = i;
      found = true;
    }
    if (found) out.push_back(LastLog{r, best});
  }
  return out;
}

// Counters for (rank, op) summed over flows, from the latest state record per
// channel at or before t.
bool progress_of(const TraceStore& store, const RankIndex& index, RankId rank,
                 OpSeq op, TimeMs t, ProgressTriple& out,
                 std::vector<EvidenceRef>* refs) {
  const std::vector<std::size_t>* recs = index.of(rank);
  if (!recs) return false;
  std::unordered_map<int, const StateRecord*> latest;
  std::unordered_map<int, TimeMs> latest_ts;
  for (std::size_t i : *recs) {
    const TraceRecord& rec = store.at(i);
    if (rec.timestamp() > t) break;
    const StateRecord* s = rec.state();
    if (!s || s->op_seq != op) continue;
    latest[s->channel] = s;
    latest_ts[s->channel] = s->window_end_ms;
  }
  if (latest.empty()) return false;
  out = ProgressTriple{};
  std::vector<int> channels;
  for (auto& [ch, _] : latest) channels.push_back(ch);
  std::sort(channels.begin(), channels.end());
  for (int ch : channels) {
    const StateRecord* s = latest.at(ch);
    out.gpu_ready += s->gpu_ready;
    out.rdma_transmitted += s->rdma_transmitted;
    out.rdma_done += s->rdma_done;
    if (refs)
      refs->push_back(EvidenceRef{rank, ch, s->window_end_ms, s->op_seq});
  }
  return true;
}

// When the rank got stuck: the first observation of the operation it never
// finished. Dependents start waiting on their ops only after the culprit has
// begun the op it is wedged in, so this orders exoneration causally even when
// the culprit keeps crawling while its victims sit idle.
TimeMs stall_onset_of(const TraceStore& store, const RankIndex& index,
                      RankId rank, OpSeq stuck_op, TimeMs t) {
  const std::vector<std::size_t>* recs = index.of(rank);
  if (!recs) return 0;
  for (std::size_t i : *recs) {
    const TraceRecord& rec = store.at(i);
    if (rec.timestamp() > t) break;
    if (rec.op_seq() == stuck_op) return rec.timestamp();
  }
  return 0;
}

// The rank's last record at or before t is a state snapshot of an operation
// that never completed on the rank: the stall signature.
bool stuck_on_incomplete(const TraceStore& store, const RankIndex& index,
                         RankId rank, TimeMs window_start, TimeMs t,
                         OpSeq* stuck_op) {
  const std::vector<std::size_t>* recs = index.of(rank);
  if (!recs) return false;
  const TraceRecord* last_in_window = nullptr;
  for (std::size_t i : *recs) {
    const TraceRecord& rec = store.at(i);
    if (rec.timestamp() > t) break;
    if (rec.timestamp() < window_start) continue;
    last_in_window = &rec;
  }
  if (!last_in_window || last_in_window->is_completion()) return false;
  const OpSeq op = last_in_window->op_seq();
  for (std::size_t i : *recs) {
    const TraceRecord& rec = store.at(i);
    if (rec.timestamp() > t) break;
    if (rec.is_completion() && rec.op_seq() == op) return false;
  }
  if (stuck_op) *stuck_op = op;
  return true;
}

// Iteration table: per member, per iteration, the group-op span.
struct IterSpan {
  TimeMs start = 0;
  TimeMs end = 0;
};

using GroupIterations = std::unordered_map<RankId, std::map<long, IterSpan>>;

}  // namespace

std::optional<std::vector<RankId>> check_min_op(
    const std::vector<std::pair<RankId, OpSeq>>& last_op_per_rank) {
  if (last_op_per_rank.empty())
    throw DataError("check_min_op: no last logs supplied");
  OpSeq min_op = last_op_per_rank.front().second;
  for (const auto& [rank, op] : last_op_per_rank) min_op = std::min(min_op, op);
  std::vector<RankId> mins;
  for (const auto& [rank, op] : last_op_per_rank)
    if (op == min_op) mins.push_back(rank);
  if (mins.size() == last_op_per_rank.size()) return std::nullopt;
  std::sort(mins.begin(), mins.end());
  return mins;
}

std::vector<RankId> check_min_data(
    const std::vector<std::pair<RankId, ProgressTriple>>& progress) {
  if (progress.empty()) throw DataError("check_min_data: no progress supplied");
  auto key = [](const ProgressTriple& p) {
    return std::make_tuple(p.rdma_done, p.rdma_transmitted, p.gpu_ready);
  };
  auto min_key = key(progress.front().second);
  for (const auto& [rank, p] : progress) min_key = std::min(min_key, key(p));
  std::vector<RankId> mins;
  for (const auto& [rank, p] : progress)
    if (key(p) == min_key) mins.push_back(rank);
  std::sort(mins.begin(), mins.end());
  return mins;
}

std::pair<RcCategory, Side> check_rc_table(const ProgressTriple& c,
                                           const ProgressTriple* peer) {
  if (!(c.gpu_ready >= c.rdma_transmitted &&
        c.rdma_transmitted >= c.rdma_done))
    throw DataError("check_rc_table: counters violate the pipeline invariant");

  RcCategory category;
  if (c.gpu_ready == 0 && c.rdma_transmitted == 0 && c.rdma_done == 0) {
    category = RcCategory::UninitializedOrBlocked;
  } else if (c.rdma_transmitted > c.rdma_done) {
    // Deepest pipeline condition first when several hold at once.
    category = RcCategory::RdmaIssueOrReceiverFailed;
  } else if (c.gpu_ready > c.rdma_transmitted) {
    category = RcCategory::RdmaIssueOrReceiverNotReady;
  } else {
    category = RcCategory::GpuIssue;
  }

  Side side = Side::Undetermined;
  if (category == RcCategory::GpuIssue) {
    side = Side::Local;  // the GPU row has no remote cause
  } else if (peer && category == RcCategory::RdmaIssueOrReceiverFailed &&
             c.gpu_ready == c.rdma_transmitted &&
             peer->gpu_ready == peer->rdma_transmitted &&
             peer->rdma_transmitted == peer->rdma_done) {
    side = Side::Remote;
  }
  return {category, side};
}

std::pair<RcCategory, Side> check_rc_table(const StateRecord& record,
                                           const StateRecord* peer) {
  ProgressTriple c{record.gpu_ready, record.rdma_transmitted, record.rdma_done};
  ProgressTriple p;
  if (peer)
    p = ProgressTriple{peer->gpu_ready, peer->rdma_transmitted,
                       peer->rdma_done};
  return check_rc_table(c, peer ? &p : nullptr);
}

namespace {

// Lower median: for even sizes the earlier of the両 central values, so a
// two-member group compares a rank against its peer.
TimeMs lower_median(std::vector<TimeMs> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

GroupIterations group_iterations(const TraceStore& store,
                                 const RankIndex& index,
                                 const CommGroup& group, OpSeq opn, TimeMs t) {
  GroupIterations out;
  for (RankId r : group.members) {
    const std::vector<std::size_t>* recs = index.of(r);
    if (!recs) continue;
    for (std::size_t i : *recs) {
      const TraceRecord& rec = store.at(i);
      if (rec.timestamp() > t) break;
      const CompletionRecord* c = rec.completion();
      if (!c || c->comm_id != group.comm_id) continue;
      const long iter = static_cast<long>(c->op_seq / opn);
      auto [it, inserted] =
          out[r].try_emplace(iter, IterSpan{c->start_ms, c->end_ms});
      if (!inserted) {
        it->second.start = std::min(it->second.start, c->start_ms);
        it->second.end = std::max(it->second.end, c->end_ms);
      }
    }
  }
  return out;
}

// Iterations every member completed, ascending.
std::vector<long> complete_iterations(const CommGroup& group,
                                      const GroupIterations& table) {
  std::vector<long> common;
  bool first = true;
  for (RankId r : group.members) {
    auto it = table.find(r);
    if (it == table.end()) return {};
    std::vector<long> iters;
    for (const auto& [j, span] : it->second) iters.push_back(j);
    if (first) {
      common = iters;
      first = false;
    } else {
      std::vector<long> merged;
      std::set_intersection(common.begin(), common.end(), iters.begin(),
                            iters.end(), std::back_inserter(merged));
      common = std::move(merged);
    }
  }
  return common;
}

bool group_has_late_member(const TraceStore& store, const RankIndex& index,
                           const CommGroup& group, const AnalysisContext& ctx,
                           TimeMs t) {
  if (group.members.size() < 2) return false;
  const OpSeq opn = static_cast<OpSeq>(ctx.program->ops.size());
  if (opn == 0) return false;
  const GroupIterations table = group_iterations(store, index, group, opn, t);
  const std::vector<long> complete = complete_iterations(group, table);
  if (complete.empty()) return false;
  const long j = complete.back();
  std::vector<TimeMs> starts, ends;
  for (RankId r : group.members) {
    starts.push_back(table.at(r).at(j).start);
    ends.push_back(table.at(r).at(j).end);
  }
  const TimeMs med_start = lower_median(starts);
  const TimeMs med_end = lower_median(ends);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (starts[i] - med_start >= ctx.cfg.straggler_threshold_ms) return true;
    if (ends[i] - med_end >= ctx.cfg.straggler_threshold_ms) return true;
  }
  return false;
}

}  // namespace

std::vector<CommId> affected_groups(const TraceStore& store,
                                    const AnalysisContext& ctx,
                                    const TriggerEvent& trigger,
                                    std::size_t* scanned) {
  const TimeMs t = trigger.time_ms;
  const TimeMs window_start = t - ctx.cfg.delta_ms;
  RankIndex index(store, scanned);

  // Flag groups with a stalled member, or (for performance triggers) a member
  // late against the group at the latest complete iteration.
  std::vector<bool> flagged(ctx.topo->groups.size(), false);
  for (const CommGroup& g : ctx.topo->groups) {
    for (RankId r : g.members) {
      OpSeq stuck = -1;
      if (stuck_on_incomplete(store, index, r, window_start, t, &stuck)) {
        flagged[static_cast<std::size_t>(g.comm_id)] = true;
        break;
      }
    }
    if (!flagged[static_cast<std::size_t>(g.comm_id)] &&
        trigger.kind == TriggerKind::Straggler &&
        group_has_late_member(store, index, g, ctx, t))
      flagged[static_cast<std::size_t>(g.comm_id)] = true;
  }

  // Expand from the trigger rank's groups along program dependencies and
  // shared ranks; keep the flagged groups reached.
  std::vector<std::vector<CommId>> adjacency(ctx.topo->groups.size());
  auto link = [&](CommId a, CommId b) {
    if (a == b) return;
    adjacency[static_cast<std::size_t>(a)].push_back(b);
    adjacency[static_cast<std::size_t>(b)].push_back(a);
  };
  for (const CollOpSpec& op : ctx.program->ops)
    for (OpSeq dep : op.depends_on)
      link(op.group, ctx.program->ops[static_cast<std::size_t>(dep)].group);
  for (RankId r = 0; r < ctx.topo->world_size(); ++r) {
    const std::vector<CommId> gs = ctx.topo->groups_of(r);
    for (std::size_t i = 0; i + 1 < gs.size(); ++i) link(gs[i], gs[i + 1]);
  }

  std::vector<bool> visited(ctx.topo->groups.size(), false);
  std::deque<CommId> frontier;
  for (CommId g : ctx.topo->groups_of(trigger.suspect_rank)) {
    frontier.push_back(g);
    visited[static_cast<std::size_t>(g)] = true;
  }
  std::vector<CommId> out;
  while (!frontier.empty()) {
    const CommId g = frontier.front();
    frontier.pop_front();
    if (flagged[static_cast<std::size_t>(g)]) out.push_back(g);
    for (CommId next : adjacency[static_cast<std::size_t>(g)]) {
      if (!visited[static_cast<std::size_t>(next)]) {
        visited[static_cast<std::size_t>(next)] = true;
        frontier.push_back(next);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Candidate {
  SuspectEntry entry;
  ProgressTriple progress;
  bool progress_known = false;
  std::vector<EvidenceRef> evidence;
  long iter_lo = 0;  // straggler lateness window, inclusive
  long iter_hi = -1;
};

// Ordered exoneration, innermost stuck operation first. A candidate whose
// stuck op transitively depends on a retained suspect's stuck op is waiting
// on that suspect; a candidate tied on the same op is cleared by a retained
// suspect with strictly less pipeline progress. The dependency edge carries
// the causal direction, so observation times play no part here.
void exonerate(std::vector<Candidate> candidates, const DepIndex& deps,
               RootCauseReport& report) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.entry.stuck_op != b.entry.stuck_op)
                       return a.entry.stuck_op < b.entry.stuck_op;
                     return a.entry.rank < b.entry.rank;
                   });
  std::vector<Candidate> retained;
  for (Candidate& c : candidates) {
    bool dropped = false;
    for (const Candidate& u : retained) {
      if (u.entry.rank == c.entry.rank) continue;
      bool path = false;
      if (u.entry.stuck_op == c.entry.stuck_op) {
        path = u.progress_known && c.progress_known &&
               std::make_tuple(u.progress.rdma_done,
                               u.progress.rdma_transmitted,
                               u.progress.gpu_ready) <
                   std::make_tuple(c.progress.rdma_done,
                                   c.progress.rdma_transmitted,
                                   c.progress.gpu_ready);
      } else {
        path = deps.depends_on(c.entry.stuck_op, u.entry.stuck_op);
      }
      if (path) {
        dropped = true;
        break;
      }
    }
    if (dropped) {
      report.exonerated.push_back(c.entry);
    } else {
      retained.push_back(std::move(c));
    }
  }
  // One entry per rank; the innermost verdict wins.
  std::set<RankId> seen;
  for (Candidate& c : retained) {
    if (!seen.insert(c.entry.rank).second) continue;
    report.suspects.push_back(c.entry);
    for (const EvidenceRef& e : c.evidence) report.evidence.push_back(e);
  }
  std::stable_sort(report.suspects.begin(), report.suspects.end(),
                   [](const SuspectEntry& a, const SuspectEntry& b) {
                     return a.rank < b.rank;
                   });
}

int max_iteration_in(const TraceStore& store, OpSeq opn, TimeMs t) {
  int max_iter = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const TraceRecord& rec = store.at(i);
    if (rec.timestamp() > t) continue;
    max_iter = std::max(max_iter, static_cast<int>(rec.op_seq() / opn));
  }
  return max_iter;
}

}  // namespace

RootCauseReport analyze_failure(const TraceStore& store,
                                const AnalysisContext& ctx,
                                const TriggerEvent& trigger) {
  ctx.cfg.validate();
  RootCauseReport report;
  report.trigger = trigger;
  const TimeMs t = trigger.time_ms;

  report.affected_groups =
      affected_groups(store, ctx, trigger, &report.records_scanned);
  if (report.affected_groups.empty() || ctx.program->ops.empty()) {
    report.verdict = Verdict::FalseTrigger;
    return report;
  }

  RankIndex index(store, &report.records_scanned);
  const OpSeq opn = static_cast<OpSeq>(ctx.program->ops.size());
  DepIndex deps(ctx, max_iteration_in(store, opn, t) + 1);

  std::vector<Candidate> candidates;
  for (CommId gid : report.affected_groups) {
    const CommGroup& group = ctx.topo->group(gid);
    const std::vector<LastLog> logs = last_logs_of_group(store, index, group, t);
    if (logs.empty()) continue;

    std::vector<std::pair<RankId, OpSeq>> last_ops;
    for (const LastLog& l : logs)
      last_ops.emplace_back(l.rank, store.at(l.index).op_seq());

    std::vector<RankId> suspect_ranks;
    if (auto mins = check_min_op(last_ops)) {
      suspect_ranks = *mins;
    } else {
      std::vector<std::pair<RankId, ProgressTriple>> progress;
      for (const auto& [rank, op] : last_ops) {
        ProgressTriple triple;
        if (progress_of(store, index, rank, op, t, triple, nullptr))
          progress.emplace_back(rank, triple);
      }
      if (progress.empty()) continue;
      suspect_ranks = check_min_data(progress);
    }

    for (RankId r : suspect_ranks) {
      OpSeq op = -1;
      for (const auto& [rank, seq] : last_ops)
        if (rank == r) op = seq;

      Candidate c;
      c.entry.rank = r;
      c.entry.group = gid;
      c.entry.stuck_op = op;
      c.entry.onset_ms = stall_onset_of(store, index, r, op, t);
      c.progress_known =
          progress_of(store, index, r, op, t, c.progress, &c.evidence);

      ProgressTriple peer_triple;
      const ProgressTriple* peer = nullptr;
      if (group.members.size() >= 2) {
        const auto pos = static_cast<std::size_t>(
            std::find(group.members.begin(), group.members.end(), r) -
            group.members.begin());
        const RankId succ = group.members[(pos + 1) % group.members.size()];
        if (progress_of(store, index, succ, op, t, peer_triple, &c.evidence))
          peer = &peer_triple;
      }

      if (c.progress_known) {
        auto [category, side] = check_rc_table(c.progress, peer);
        c.entry.category = category;
        c.entry.side = side;
      } else {
        c.entry.category = RcCategory::UninitializedOrBlocked;
        c.entry.side = Side::Undetermined;
      }
      if (c.evidence.empty()) {
        // Cite at least the last log the verdict hangs on.
        for (const LastLog& l : logs)
          if (l.rank == r)
            c.evidence.push_back(EvidenceRef{r, store.at(l.index).channel(),
                                             store.at(l.index).timestamp(),
                                             store.at(l.index).op_seq()});
      }
      candidates.push_back(std::move(c));
    }
  }

  exonerate(std::move(candidates), deps, report);
  report.verdict =
      report.suspects.empty() ? Verdict::Undetermined : Verdict::Suspects;
  return report;
}

RootCauseReport analyze_straggler(const TraceStore& store,
                                  const AnalysisContext& ctx,
                                  const TriggerEvent& trigger) {
  ctx.cfg.validate();
  RootCauseReport report;
  report.trigger = trigger;
  const TimeMs t = trigger.time_ms;
  const int k = ctx.cfg.consecutive_iterations_k;

  report.affected_groups =
      affected_groups(store, ctx, trigger, &report.records_scanned);
  if (report.affected_groups.empty() || ctx.program->ops.empty()) {
    report.verdict = Verdict::FalseTrigger;
    return report;
  }

  RankIndex index(store, &report.records_scanned);
  const OpSeq opn = static_cast<OpSeq>(ctx.program->ops.size());

  bool any_history = false;
  std::vector<Candidate> candidates;
  for (CommId gid : report.affected_groups) {
    const CommGroup& group = ctx.topo->group(gid);
    if (group.members.size() < 2) continue;
    const GroupIterations table = group_iterations(store, index, group, opn, t);
    const std::vector<long> complete = complete_iterations(group, table);
    if (static_cast<int>(complete.size()) < k) continue;
    any_history = true;

    OpSeq group_first_op = opn;
    for (const CollOpSpec& op : ctx.program->ops)
      if (op.group == gid) group_first_op = std::min(group_first_op, op.op_seq);

    const std::vector<long> window(complete.end() - k, complete.end());
    for (RankId r : group.members) {
      bool start_late = true;
      bool end_late = true;
      for (long j : window) {
        std::vector<TimeMs> starts, ends;
        for (RankId m : group.members) {
          starts.push_back(table.at(m).at(j).start);
          ends.push_back(table.at(m).at(j).end);
        }
        const IterSpan& mine = table.at(r).at(j);
        if (mine.start - lower_median(starts) < ctx.cfg.straggler_threshold_ms)
          start_late = false;
        if (mine.end - lower_median(ends) < ctx.cfg.straggler_threshold_ms)
          end_late = false;
      }
      if (!start_late && !end_late) continue;

      Candidate c;
      c.entry.rank = r;
      c.entry.category = start_late ? RcCategory::StragglerLateStart
                                    : RcCategory::StragglerLateEnd;
      c.entry.side = Side::Local;
      c.entry.group = gid;
      c.entry.stuck_op =
          static_cast<OpSeq>(window.back()) * opn + group_first_op;
      c.entry.onset_ms = table.at(r).at(window.front()).start;
      c.iter_lo = window.front();
      c.iter_hi = window.back();
      for (long j : window)
        c.evidence.push_back(EvidenceRef{r, -1, table.at(r).at(j).start,
                                         static_cast<OpSeq>(j) * opn +
                                             group_first_op});
      candidates.push_back(std::move(c));
    }

    // Flow-level supplement over the analysis window: one flow much slower
    // than its siblings, or left incomplete.
    std::map<std::pair<RankId, OpSeq>, std::vector<const CompletionRecord*>>
        flows_by_op;
    std::map<std::pair<RankId, OpSeq>, std::set<int>> state_channels;
    std::set<std::tuple<RankId, OpSeq, int>> completed_channels;
    for (RankId r : group.members) {
      const std::vector<std::size_t>* recs = index.of(r);
      if (!recs) continue;
      for (std::size_t i : *recs) {
        const TraceRecord& rec = store.at(i);
        if (rec.timestamp() > t) break;
        if (rec.comm_id() != gid) continue;
        const CompletionRecord* comp = rec.completion();
        // Receive-side flows mirror the remote sender; judge only the rank's
        // own transmissions.
        if (comp && comp->op_name == OpName::Recv) continue;
        if (!comp && store.at(i).state() &&
            ctx.program->ops[static_cast<std::size_t>(rec.op_seq()) %
                             ctx.program->ops.size()]
                    .op_name == OpName::Recv)
          continue;
        if (comp) completed_channels.emplace(r, comp->op_seq, comp->channel);
        if (rec.timestamp() < t - ctx.cfg.delta_ms) continue;
        if (comp)
          flows_by_op[{r, comp->op_seq}].push_back(comp);
        else
          state_channels[{r, rec.op_seq()}].insert(rec.channel());
      }
    }
    auto already_candidate = [&](RankId r) {
      for (const Candidate& c : candidates)
        if (c.entry.rank == r) return true;
      return false;
    };
    for (const auto& [key, comps] : flows_by_op) {
      const auto& [rank, op] = key;
      if (already_candidate(rank)) continue;
      if (comps.size() >= 2) {
        std::vector<double> durations;
        for (const CompletionRecord* comp : comps)
          durations.push_back(comp->end_ms - comp->start_ms);
        std::vector<double> sorted = durations;
        std::sort(sorted.begin(), sorted.end());
        const double med = sorted[(sorted.size() - 1) / 2];
        for (std::size_t i = 0; i < comps.size(); ++i) {
          if (med > 0 && durations[i] > ctx.cfg.flow_skew_factor * med) {
            Candidate c;
            c.entry.rank = rank;
            c.entry.category = RcCategory::FlowSkewed;
            c.entry.side = Side::Local;
            c.entry.group = gid;
            c.entry.stuck_op = op;
            c.entry.onset_ms = comps[i]->start_ms;
            c.evidence.push_back(EvidenceRef{rank, comps[i]->channel,
                                             comps[i]->end_ms, op});
            candidates.push_back(std::move(c));
            break;
          }
        }
      }
    }
    for (const auto& [key, channels] : state_channels) {
      const auto& [rank, op] = key;
      if (already_candidate(rank)) continue;
      // Only meaningful when sibling flows of the same op did complete.
      bool any_completed = false;
      for (int ch : channels)
        if (completed_channels.count({rank, op, ch})) any_completed = true;
      if (!any_completed) continue;
      for (int ch : channels) {
        if (!completed_channels.count({rank, op, ch})) {
          Candidate c;
          c.entry.rank = rank;
          c.entry.category = RcCategory::FlowIncomplete;
          c.entry.side = Side::Local;
          c.entry.group = gid;
          c.entry.stuck_op = op;
          c.entry.onset_ms = t;
          c.evidence.push_back(EvidenceRef{rank, ch, t, op});
          candidates.push_back(std::move(c));
          break;
        }
      }
    }
  }

  if (candidates.empty()) {
    report.verdict =
        any_history ? Verdict::NoStraggler : Verdict::InsufficientHistory;
    return report;
  }

  // A rank that is merely late may just sit behind the real straggler in the
  // dependency order. The root carries self-evidence: one of its own
  // transmissions ran anomalously long against its peers. Collective members
  // are judged against the other members of the same op instance, since ring
  // waiters inflate together while the straggler's own work stands out.
  // Point-to-point sends have no sibling and are judged against the other
  // instances of the same op in that iteration. When any candidate shows
  // self-evidence, the ones that do not are dropped.
  std::map<OpSeq, std::map<RankId, std::vector<double>>> durations_by_op;
  std::map<std::pair<int, long>, std::vector<double>> cohort_durations;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const TraceRecord& rec = store.at(i);
    if (rec.timestamp() > t) continue;
    const CompletionRecord* comp = rec.completion();
    if (!comp || comp->op_name == OpName::Recv) continue;
    durations_by_op[comp->op_seq][comp->rank].push_back(comp->end_ms -
                                                        comp->start_ms);
    cohort_durations[{static_cast<int>(comp->op_name),
                      static_cast<long>(comp->op_seq / opn)}]
        .push_back(comp->end_ms - comp->start_ms);
  }
  report.records_scanned += store.size();
  auto lower_med = [](std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
  };
  auto self_faulted = [&](const Candidate& c) {
    if (c.iter_hi < c.iter_lo) return true;  // flow findings carry their own
    for (const auto& [op, by_rank] : durations_by_op) {
      const long iter = static_cast<long>(op / opn);
      if (iter < c.iter_lo || iter > c.iter_hi) continue;
      auto mine = by_rank.find(c.entry.rank);
      if (mine == by_rank.end()) continue;
      std::vector<double> siblings;
      for (const auto& [rank, durs] : by_rank) {
        if (rank == c.entry.rank) continue;
        siblings.insert(siblings.end(), durs.begin(), durs.end());
      }
      if (siblings.empty()) {
        const auto& name_key = ctx.program->ops[static_cast<std::size_t>(
            op % opn)];
        auto cohort = cohort_durations.find(
            {static_cast<int>(name_key.op_name), iter});
        if (cohort == cohort_durations.end() || cohort->second.size() < 2)
          continue;
        siblings = cohort->second;
      }
      const double med = lower_med(std::move(siblings));
      if (med <= 0) continue;
      for (double dur : mine->second)
        if (dur > ctx.cfg.flow_skew_factor * med) return true;
    }
    return false;
  };

  bool any_self = false;
  for (const Candidate& c : candidates)
    if (self_faulted(c)) any_self = true;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.entry.stuck_op != b.entry.stuck_op)
                       return a.entry.stuck_op < b.entry.stuck_op;
                     return a.entry.rank < b.entry.rank;
                   });
  std::set<RankId> seen;
  for (const Candidate& c : candidates) {
    const bool keep = !any_self || self_faulted(c);
    if (!keep) {
      report.exonerated.push_back(c.entry);
      continue;
    }
    if (!seen.insert(c.entry.rank).second) continue;
    report.suspects.push_back(c.entry);
    for (const EvidenceRef& e : c.evidence) report.evidence.push_back(e);
  }
  std::stable_sort(report.suspects.begin(), report.suspects.end(),
                   [](const SuspectEntry& a, const SuspectEntry& b) {
                     return a.rank < b.rank;
                   });
  report.verdict =
      report.suspects.empty() ? Verdict::NoStraggler : Verdict::Suspects;
  return report;
}

RootCauseReport analyze(const TraceStore& store, const AnalysisContext& ctx,
                        const TriggerEvent& trigger) {
  return trigger.kind == TriggerKind::Failure
             ? analyze_failure(store, ctx, trigger)
             : analyze_straggler(store, ctx, trigger);
}

}  // namespace collsight
