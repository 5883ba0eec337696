// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite over the shipped scenario catalog. Runs every criterion at
// its stated tolerance and prints one pass/fail line per criterion; exits
// nonzero if any fails. Usage: collsight_acceptance <configs-dir>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "collsight/rca.hpp"
#include "collsight/runner.hpp"
#include "collsight/scenario.hpp"
#include "collsight/trace.hpp"
#include "collsight/trigger.hpp"

using namespace collsight;

namespace {

int g_failures = 0;

void report(int criterion, const char* what, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion,
              what, detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

struct ScenarioRun {
  std::string name;
  ScenarioConfig cfg;
  Topology topo;
  RunResult run;
  double wall_s = 0;
  NodeId injected = -1;
  TimeMs onset = 0;
};

NodeId injected_node(const ScenarioConfig& cfg, const Topology& topo) {
  const FaultSpec& f = cfg.faults.front();
  return f.target == FaultTarget::Rank ? topo.node_of(f.rank) : f.node;
}

// Independent recurrence over the ring pipeline, mirroring the staging ->
// transmit -> ack algebra step by step.
struct RingOracle {
  int n;
  int chunks;
  std::vector<double> copy_ms;
  double wire_ms;
  double ack_ms;
  std::vector<std::vector<std::vector<double>>> d;
  std::vector<double> completion;

  void run() {
    const int steps = n - 1;
    auto g = std::vector<std::vector<std::vector<double>>>(
        n, std::vector<std::vector<double>>(steps,
                                            std::vector<double>(chunks, 0)));
    auto t = g;
    d = g;
    std::vector<double> copy_free(n, 0), flow_free(n, 0);
    for (int s = 0; s < steps; ++s) {
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < chunks; ++c) {
          const double ready = s == 0 ? 0.0 : d[(r + n - 1) % n][s - 1][c];
          g[r][s][c] = std::max(ready, copy_free[r]) + copy_ms[r];
          copy_free[r] = g[r][s][c];
        }
      }
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < chunks; ++c) {
          t[r][s][c] = std::max(g[r][s][c], flow_free[r]) + wire_ms;
          flow_free[r] = t[r][s][c];
          d[r][s][c] = t[r][s][c] + ack_ms;
        }
      }
    }
    completion.assign(n, 0);
    for (int r = 0; r < n; ++r)
      completion[r] = std::max(d[r][steps - 1][chunks - 1],
                               d[(r + n - 1) % n][steps - 1][chunks - 1]);
  }
};

std::string category_name(RcCategory c) { return to_string(c); }

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <configs-dir>\n", argv[0]);
    return 2;
  }
  const std::string dir = argv[1];

  // --- run the catalog once, shared by criteria 1..3 ---
  std::vector<ScenarioRun> runs;
  for (int i = 1; i <= 7; ++i) {
    ScenarioRun sr;
    sr.name = "scenario" + std::to_string(i);
    sr.cfg = load_scenario_file(dir + "/" + sr.name + ".json");
    sr.topo = sr.cfg.build_topology();
    sr.injected = injected_node(sr.cfg, sr.topo);
    sr.onset = sr.cfg.faults.front().onset_ms;
    const auto t0 = std::chrono::steady_clock::now();
    sr.run = run_e2e(sr.cfg);
    sr.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
    runs.push_back(std::move(sr));
  }

  // 1. Fault-catalog detection: all seven scenarios trigger, each in < 60 s
  //    of wall clock.
  {
    int detected = 0;
    bool fast = true;
    std::string detail;
    for (const ScenarioRun& sr : runs) {
      if (!sr.run.outcomes.empty()) ++detected;
      if (sr.wall_s >= 60.0) fast = false;
      detail += sr.name + "=" + (sr.run.outcomes.empty() ? "miss" : "hit") +
                " ";
    }
    report(1, "fault-catalog detection 7/7 within 60s each",
           detected == 7 && fast,
           detail + "detected " + std::to_string(detected) + "/7");
  }

  // 2. Localization exactness: suspects never leave the injected node, at
  //    least one lands on it, and the category matches the catalog map.
  {
    const std::map<int, RcCategory> expected = {
        {1, RcCategory::RdmaIssueOrReceiverNotReady},
        {2, RcCategory::RdmaIssueOrReceiverNotReady},
        {3, RcCategory::GpuIssue},
        {4, RcCategory::GpuIssue},
        {5, RcCategory::GpuIssue},
        {6, RcCategory::RdmaIssueOrReceiverFailed},
        {7, RcCategory::StragglerLateStart},
    };
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const ScenarioRun& sr = runs[i];
      const RcCategory want = expected.at(static_cast<int>(i) + 1);
      bool on_node = false;
      bool off_node = false;
      bool category = false;
      for (const DetectionOutcome& o : sr.run.outcomes) {
        if (o.report.verdict != Verdict::Suspects) continue;
        for (const SuspectEntry& s : o.report.suspects) {
          if (sr.topo.node_of(s.rank) == sr.injected) {
            on_node = true;
            if (s.category == want) category = true;
          } else {
            off_node = true;
          }
        }
      }
      const bool good = on_node && !off_node && category;
      if (!good) {
        ok = false;
        detail += sr.name + (on_node ? "" : " no-suspect") +
                  (off_node ? " off-node" : "") +
                  (category ? "" : " wrong-category") + " ";
      }
    }
    report(2, "localization and category map over the catalog", ok, detail);
  }

  // 3. Trigger latency: the first trigger fires within
  //    detect_interval + delta of the fault onset. Exact bound, no slack.
  {
    bool ok = true;
    std::string detail;
    for (const ScenarioRun& sr : runs) {
      if (sr.run.outcomes.empty()) {
        ok = false;
        detail += sr.name + "=none ";
        continue;
      }
      const double latency = sr.run.outcomes.front().trigger.time_ms - sr.onset;
      const double bound =
          sr.cfg.trigger.detect_interval_ms + sr.cfg.trigger.delta_ms;
      if (!(latency <= bound)) ok = false;
      detail += sr.name + "=" + std::to_string(static_cast<int>(latency)) +
                "/" + std::to_string(static_cast<int>(bound)) + " ";
    }
    report(3, "trigger latency within detect_interval + delta", ok, detail);
  }

  // 4. Slow-rank cascade: a 4-rank all-gather with rank 0 staging at half
  //    rate matches the hand-computed event table exactly, and all four
  //    completion timestamps sit within one normal chunk-pipeline time.
  {
    const Topology topo = build_layout(1, 1, 4, 1, 1, 4);
    OpProgram program;
    CollOpSpec op;
    op.op_seq = 0;
    op.op_name = OpName::AllGather;
    op.group = 0;
    op.msg_bytes = 16ull << 20;  // one-chunk shard
    program.ops.push_back(op);

    SimConfig sim;
    sim.chunk_bytes = 4ull << 20;
    sim.copy_rate = 4194304.0;
    sim.link_bandwidth = 2097152.0;
    sim.link_latency_ms = 0.5;
    sim.ack_latency_ms = 0.5;
    sim.state_log_window_ms = 0.49;  // boundaries never collide with events
    sim.max_sim_ms = 500.0;
    sim.iterations = 1;

    FaultSpec slow;
    slow.kind = FaultKind::GpuPowerLimit;
    slow.target = FaultTarget::Rank;
    slow.rank = 0;
    slow.onset_ms = 0;
    slow.copy_factor = 0.5;

    RingOracle base{4, 1, {1, 1, 1, 1}, 2.5, 0.5, {}, {}};
    base.run();
    RingOracle slowed{4, 1, {2, 1, 1, 1}, 2.5, 0.5, {}, {}};
    slowed.run();

    std::vector<TraceRecord> base_records, slow_records;
    SimSummary base_sum = run_simulation(
        topo, program, {}, sim,
        [&](const TraceRecord& r) { base_records.push_back(r); });
    SimSummary slow_sum = run_simulation(
        topo, program, {slow}, sim,
        [&](const TraceRecord& r) { slow_records.push_back(r); });

    bool ok = true;
    // Frozen oracle facts: clean run finishes at 12 ms, the cascade adds
    // exactly one staging time per affected step, everyone lands on 13 ms.
    ok &= base.completion == std::vector<double>{12, 12, 12, 12};
    ok &= slowed.completion == std::vector<double>{13, 13, 13, 13};
    ok &= slowed.d[0][0][0] - base.d[0][0][0] == 1.0;
    ok &= slowed.d[1][1][0] - base.d[1][1][0] == 1.0;
    ok &= slowed.d[2][2][0] - base.d[2][2][0] == 1.0;
    for (int r = 0; r < 4; ++r) {
      ok &= base_sum.rank_completion_ms[static_cast<std::size_t>(r)] ==
            base.completion[static_cast<std::size_t>(r)];
      ok &= slow_sum.rank_completion_ms[static_cast<std::size_t>(r)] ==
            slowed.completion[static_cast<std::size_t>(r)];
    }
    // Per-flow wire endpoints match the oracle acks exactly.
    for (const TraceRecord& rec : slow_records) {
      if (const CompletionRecord* c = rec.completion())
        ok &= c->end_ms ==
              slowed.d[static_cast<std::size_t>(c->rank)][2][0];
    }
    // Mid-run counter snapshots show the stall moving one step per hop:
    // between events, a rank's staged count in the slowed run lags the clean
    // run by exactly the slow shard.
    auto staged_at = [](const std::vector<TraceRecord>& records, RankId rank,
                        double window) {
      std::uint64_t staged = 0;
      bool found = false;
      for (const TraceRecord& rec : records) {
        const StateRecord* s = rec.state();
        if (s && s->rank == rank && s->window_end_ms == window) {
          staged = s->gpu_ready;
          found = true;
        }
      }
      return found ? static_cast<long>(staged) : -1L;
    };
    ok &= staged_at(base_records, 1, 11 * 0.49) == 2;  // 5.39 ms
    ok &= staged_at(slow_records, 1, 11 * 0.49) == 1;
    ok &= staged_at(base_records, 2, 19 * 0.49) == 3;  // 9.31 ms
    ok &= staged_at(slow_records, 2, 19 * 0.49) == 2;
    const auto [lo, hi] = std::minmax_element(
        slow_sum.rank_completion_ms.begin(), slow_sum.rank_completion_ms.end());
    const double pipeline = 1.0 + 2.5 + 0.5;
    ok &= (*hi - *lo) <= pipeline;
    report(4, "slow-rank cascade matches the event oracle exactly", ok, "");
  }

  // 5. Counter-table totality over 0 <= done <= transmitted <= staged <= 5,
  //    plus the sender/receiver cross-check.
  {
    bool ok = true;
    int cells = 0;
    for (std::uint64_t staged = 0; staged <= 5; ++staged) {
      for (std::uint64_t tr = 0; tr <= staged; ++tr) {
        for (std::uint64_t done = 0; done <= tr; ++done) {
          ++cells;
          const auto [category, side] =
              check_rc_table(ProgressTriple{staged, tr, done}, nullptr);
          RcCategory want;
          if (staged == 0) want = RcCategory::UninitializedOrBlocked;
          else if (tr > done) want = RcCategory::RdmaIssueOrReceiverFailed;
          else if (staged > tr) want = RcCategory::RdmaIssueOrReceiverNotReady;
          else want = RcCategory::GpuIssue;
          if (category != want) ok = false;
          (void)side;
        }
      }
    }
    ok &= cells == 56;
    const ProgressTriple sender{5, 5, 3};
    const ProgressTriple receiver{5, 5, 5};
    ok &= check_rc_table(sender, &receiver) ==
          std::pair{RcCategory::RdmaIssueOrReceiverFailed, Side::Remote};
    report(5, "counter-table totality and remote cross-check", ok,
           std::to_string(cells) + " cells");
  }

  // 6. Clean-run soundness: the fault-free catalog config produces zero
  //    triggers; the throughput rule fires at exactly half and not above.
  {
    ScenarioConfig clean = load_scenario_file(dir + "/clean.json");
    const RunResult run = run_e2e(clean);
    bool ok = run.summary.completed && run.outcomes.empty();
    std::string detail =
        "triggers=" + std::to_string(run.outcomes.size());

    TriggerConfig tc;
    tc.delta_ms = 100;
    auto boundary = [&](std::uint64_t window_bytes) {
      TraceStore store;
      TriggerState state;
      // Warm a 100 bytes/ms baseline over four windows.
      for (int w = 0; w < 4; ++w) {
        const TimeMs t = 1000.0 - (4 - w) * tc.delta_ms + tc.delta_ms;
        CompletionRecord c;
        c.rank = 0;
        c.op_seq = w * 2;
        c.op_name = OpName::AllGather;
        c.msg_bytes = 5000;
        c.start_ms = t - 80;
        c.end_ms = t - 75;
        TraceRecord rec;
        rec.body = c;
        store.append(rec);
        c.op_seq = w * 2 + 1;
        c.start_ms = t - 30;
        c.end_ms = t - 25;
        rec.body = c;
        store.append(rec);
        if (evaluate(store, {0}, t, state, tc).has_value()) return false;
      }
      CompletionRecord c;
      c.rank = 0;
      c.op_seq = 100;
      c.op_name = OpName::AllGather;
      c.msg_bytes = window_bytes;
      c.start_ms = 1050;
      c.end_ms = 1055;
      TraceRecord rec;
      rec.body = c;
      store.append(rec);
      return evaluate(store, {0}, 1100, state, tc).has_value();
    };
    const bool fires_at_half = boundary(5000);   // 50 bytes/ms
    const bool quiet_above = !boundary(5100);    // 51 bytes/ms
    ok &= fires_at_half && quiet_above;
    detail += fires_at_half ? " half-fires" : " half-missed";
    detail += quiet_above ? " 51%-quiet" : " 51%-fired";
    report(6, "clean-run soundness and threshold boundary", ok, detail);
  }

  // 7. Determinism and replay: identical config and seed give byte-identical
  //    trace files; replaying a saved trace reproduces the e2e reports.
  {
    const ScenarioConfig cfg = load_scenario_file(dir + "/scenario1.json");
    const RunResult a = run_simulate(cfg);
    const RunResult b = run_simulate(cfg);
    const std::string trace_a = serialize_records(a.records);
    bool ok = trace_a == serialize_records(b.records) && !trace_a.empty();

    const RunResult live = run_e2e(cfg);
    const RunResult replay = run_analyze(parse_trace_text(trace_a), cfg);
    const std::string live_reports = reports_to_jsonl(live.outcomes, cfg);
    ok &= live_reports == reports_to_jsonl(replay.outcomes, cfg);
    ok &= !live_reports.empty();
    report(7, "byte-identical traces and exact report replay", ok, "");
  }

  // 8. Trace volume: serialized bytes per machine-iteration on the clean
  //    32-rank run stay under 200 KB.
  {
    ScenarioConfig clean = load_scenario_file(dir + "/clean.json");
    const RunResult run = run_simulate(clean);
    const std::string bytes = serialize_records(run.records);
    const double machines = static_cast<double>(
        clean.build_topology().nodes.size());
    const double per_machine_iter =
        static_cast<double>(bytes.size()) /
        (machines * static_cast<double>(clean.sim.iterations));
    report(8, "trace volume per machine-iteration under 200 KB",
           per_machine_iter < 200.0 * 1024.0,
           std::to_string(static_cast<long>(per_machine_iter)) + " bytes");
  }

  // 9. Store-query oracle equivalence on 1000 random records and 100 random
  //    windows, exact equality.
  {
    std::mt19937_64 rng(101);
    TraceStore store;
    std::vector<TraceRecord> all;
    for (int i = 0; i < 1000; ++i) {
      TraceRecord rec;
      if (rng() % 2 == 0) {
        CompletionRecord c;
        c.rank = static_cast<RankId>(rng() % 32);
        c.node = c.rank / 8;
        c.comm_id = static_cast<CommId>(rng() % 8);
        c.channel = static_cast<int>(rng() % 2);
        c.op_seq = static_cast<OpSeq>(rng() % 300);
        c.op_name = OpName::ReduceScatter;
        c.msg_bytes = 1 + rng() % 10000;
        c.end_ms = static_cast<double>(rng() % 50000) / 7.0;
        c.start_ms = c.end_ms > 1 ? c.end_ms - 1 : 0;
        rec.body = c;
      } else {
        StateRecord s;
        s.rank = static_cast<RankId>(rng() % 32);
        s.node = s.rank / 8;
        s.comm_id = static_cast<CommId>(rng() % 8);
        s.channel = static_cast<int>(rng() % 2);
        s.op_seq = static_cast<OpSeq>(rng() % 300);
        s.window_end_ms = static_cast<double>(rng() % 50000) / 7.0;
        s.rdma_done = rng() % 4;
        s.rdma_transmitted = s.rdma_done + rng() % 4;
        s.gpu_ready = s.rdma_transmitted + rng() % 4;
        s.total_chunks = s.gpu_ready + rng() % 4;
        rec.body = s;
      }
      store.append(rec);
      all.push_back(rec);
    }

    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
      const TimeMs t0 = static_cast<double>(rng() % 8000);
      const TimeMs t1 = t0 + static_cast<double>(rng() % 4000);
      std::vector<RankId> ranks;
      for (RankId r = 0; r < 32; ++r)
        if (rng() % 2 == 0) ranks.push_back(r);
      if (ranks.empty()) ranks.push_back(1);

      std::vector<TraceRecord> expected;
      for (const TraceRecord& rec : all) {
        if (rec.timestamp() < t0 || rec.timestamp() > t1) continue;
        if (std::find(ranks.begin(), ranks.end(), rec.rank()) == ranks.end())
          continue;
        expected.push_back(rec);
      }
      std::stable_sort(expected.begin(), expected.end(),
                       [](const TraceRecord& x, const TraceRecord& y) {
                         if (x.timestamp() != y.timestamp())
                           return x.timestamp() < y.timestamp();
                         return x.rank() < y.rank();
                       });
      const auto got = store.query(ranks, t0, t1);
      if (got.size() != expected.size()) {
        ok = false;
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i)
        if (serialize_record(got[i]) != serialize_record(expected[i]))
          ok = false;

      CommGroup g;
      g.comm_id = 0;
      for (RankId r : ranks) g.members.push_back(r);
      const auto last = store.last_log_per_rank(g, t1);
      for (RankId r : ranks) {
        const TraceRecord* want = nullptr;
        for (const TraceRecord& rec : all) {
          if (rec.rank() != r || rec.timestamp() > t1) continue;
          if (!want || rec.timestamp() >= want->timestamp()) want = &rec;
        }
        const auto it = std::find_if(
            last.begin(), last.end(),
            [&](const auto& p) { return p.first == r; });
        if (!want) {
          if (it != last.end()) ok = false;
        } else if (it == last.end() ||
                   serialize_record(store.at(it->second)) !=
                       serialize_record(*want)) {
          ok = false;
        }
      }
    }
    report(9, "store queries equal brute-force scans", ok, "");
  }

  std::printf("%s: %d criterion failure(s)\n",
              g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
