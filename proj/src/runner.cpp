// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace collsight {

namespace {

void append_number(std::string& out, double v) {
  char tmp[64];
  auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
  (void)ec;
  out.append(tmp, ptr);
}

std::optional<TimeMs> first_fault_onset(const ScenarioConfig& cfg) {
  std::optional<TimeMs> onset;
  for (const FaultSpec& f : cfg.faults)
    if (!onset || f.onset_ms < *onset) onset = f.onset_ms;
  return onset;
}

}  // namespace

RunResult run_simulate(const ScenarioConfig& cfg) {
  const Topology topo = cfg.build_topology();
  const OpProgram program = cfg.build_program(topo);

  RunResult result;
  RingBuffer buffer(cfg.sim.buffer_capacity);
  TraceStore store;
  RecordSink sink = [&](const TraceRecord& rec) {
    buffer.emit(rec);
    if (buffer.size() >= buffer.capacity() / 2) drain(buffer, store);
  };
  result.summary = run_simulation(topo, program, cfg.faults, cfg.sim, sink);
  drain(buffer, store);
  result.records = store.records();
  return result;
}

std::vector<DetectionOutcome> run_detection(
    const std::vector<TraceRecord>& records, const Topology& topo,
    const OpProgram& program, const ScenarioConfig& cfg,
    std::vector<RankId>* sampled_out) {
  TraceStore store;
  TimeMs last_ts = 0;
  for (const TraceRecord& rec : records) {
    store.append(rec);
    last_ts = std::max(last_ts, rec.timestamp());
  }

  AnalysisContext ctx;
  ctx.topo = &topo;
  ctx.program = &program;
  ctx.cfg = cfg.analysis;

  const std::vector<RankId> sampled =
      sample_ranks(topo, cfg.trigger, cfg.sim.seed);
  if (sampled_out) *sampled_out = sampled;

  std::vector<DetectionOutcome> outcomes;
  TriggerState state;
  for (TimeMs t = cfg.trigger.detect_interval_ms; t <= last_ts;
       t += cfg.trigger.detect_interval_ms) {
    if (t < cfg.trigger.delta_ms) continue;
    std::optional<TriggerEvent> trigger =
        evaluate(store, sampled, t, state, cfg.trigger);
    if (!trigger) continue;
    DetectionOutcome outcome;
    outcome.trigger = *trigger;
    outcome.report = analyze(store, ctx, *trigger);
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

RunResult run_e2e(const ScenarioConfig& cfg) {
  RunResult result = run_simulate(cfg);
  const Topology topo = cfg.build_topology();
  const OpProgram program = cfg.build_program(topo);
  result.outcomes =
      run_detection(result.records, topo, program, cfg, &result.sampled);
  return result;
}

RunResult run_analyze(const std::vector<TraceRecord>& records,
                      const ScenarioConfig& cfg) {
  RunResult result;
  result.records = records;
  const Topology topo = cfg.build_topology();
  const OpProgram program = cfg.build_program(topo);
  result.outcomes =
      run_detection(records, topo, program, cfg, &result.sampled);
  return result;
}

std::string reports_to_jsonl(const std::vector<DetectionOutcome>& outcomes,
                             const ScenarioConfig& cfg) {
  const std::optional<TimeMs> onset = first_fault_onset(cfg);
  std::string out;
  for (const DetectionOutcome& o : outcomes) {
    out += "{\"type\":\"trigger\",\"kind\":\"";
    out += to_string(o.trigger.kind);
    out += "\",\"suspect_rank\":";
    out += std::to_string(o.trigger.suspect_rank);
    out += ",\"time_ms\":";
    append_number(out, o.trigger.time_ms);
    if (onset && o.trigger.time_ms >= *onset) {
      out += ",\"latency_ms\":";
      append_number(out, o.trigger.time_ms - *onset);
    }
    out += "}\n";

    const RootCauseReport& r = o.report;
    out += "{\"type\":\"report\",\"time_ms\":";
    append_number(out, o.trigger.time_ms);
    out += ",\"trigger_kind\":\"";
    out += to_string(o.trigger.kind);
    out += "\",\"verdict\":\"";
    out += to_string(r.verdict);
    out += "\",\"suspects\":[";
    for (std::size_t i = 0; i < r.suspects.size(); ++i) {
      const SuspectEntry& s = r.suspects[i];
      if (i) out += ",";
      out += "{\"rank\":";
      out += std::to_string(s.rank);
      out += ",\"category\":\"";
      out += to_string(s.category);
      out += "\",\"side\":\"";
      out += to_string(s.side);
      out += "\",\"group\":";
      out += std::to_string(s.group);
      out += ",\"op_seq\":";
      out += std::to_string(s.stuck_op);
      out += ",\"onset_ms\":";
      append_number(out, s.onset_ms);
      out += "}";
    }
    out += "],\"affected_groups\":[";
    for (std::size_t i = 0; i < r.affected_groups.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(r.affected_groups[i]);
    }
    out += "],\"evidence\":[";
    for (std::size_t i = 0; i < r.evidence.size(); ++i) {
      const EvidenceRef& e = r.evidence[i];
      if (i) out += ",";
      out += "{\"rank\":";
      out += std::to_string(e.rank);
      out += ",\"channel\":";
      out += std::to_string(e.channel);
      out += ",\"time_ms\":";
      append_number(out, e.time_ms);
      out += ",\"op_seq\":";
      out += std::to_string(e.op_seq);
      out += "}";
    }
    out += "],\"records_scanned\":";
    out += std::to_string(r.records_scanned);
    out += "}\n";
  }
  return out;
}

std::string reports_to_text(const std::vector<DetectionOutcome>& outcomes,
                            const ScenarioConfig& cfg) {
  const std::optional<TimeMs> onset = first_fault_onset(cfg);
  std::string out;
  if (outcomes.empty()) {
    out += "no triggers\n";
    return out;
  }
  for (const DetectionOutcome& o : outcomes) {
    out += "[t=";
    append_number(out, o.trigger.time_ms);
    out += " ms] ";
    out += to_string(o.trigger.kind);
    out += " trigger on rank ";
    out += std::to_string(o.trigger.suspect_rank);
    if (onset && o.trigger.time_ms >= *onset) {
      out += " (";
      append_number(out, o.trigger.time_ms - *onset);
      out += " ms after fault onset)";
    }
    out += "\n  verdict: ";
    out += to_string(o.report.verdict);
    out += "\n";
    for (const SuspectEntry& s : o.report.suspects) {
      out += "  suspect rank ";
      out += std::to_string(s.rank);
      out += ": ";
      out += to_string(s.category);
      out += " (side ";
      out += to_string(s.side);
      out += ", group ";
      out += std::to_string(s.group);
      out += ", op ";
      out += std::to_string(s.stuck_op);
      out += ")\n";
    }
  }
  return out;
}

std::string summary_to_json(const RunResult& result) {
  const SimSummary& s = result.summary;
  std::string out = "{\"completed\":";
  out += s.completed ? "true" : "false";
  out += ",\"end_ms\":";
  append_number(out, s.end_ms);
  out += ",\"events\":";
  out += std::to_string(s.events_processed);
  out += ",\"records\":";
  out += std::to_string(s.records_emitted);
  out += ",\"triggers\":";
  out += std::to_string(result.outcomes.size());
  out += ",\"rank_completion_ms\":[";
  for (std::size_t i = 0; i < s.rank_completion_ms.size(); ++i) {
    if (i) out += ",";
    append_number(out, s.rank_completion_ms[i]);
  }
  out += "]}";
  return out;
}

std::string summary_to_text(const RunResult& result) {
  const SimSummary& s = result.summary;
  std::string out;
  out += "simulated ";
  append_number(out, s.end_ms);
  out += " ms, ";
  out += std::to_string(s.events_processed);
  out += " events, ";
  out += std::to_string(s.records_emitted);
  out += " trace records, run ";
  out += s.completed ? "completed" : "stalled";
  out += "\n";
  TimeMs min_done = -1, max_done = -1;
  int incomplete = 0;
  for (TimeMs v : s.rank_completion_ms) {
    if (v < 0) {
      ++incomplete;
      continue;
    }
    if (min_done < 0 || v < min_done) min_done = v;
    max_done = std::max(max_done, v);
  }
  if (incomplete == 0 && !s.rank_completion_ms.empty()) {
    out += "rank completion spread: ";
    append_number(out, min_done);
    out += " .. ";
    append_number(out, max_done);
    out += " ms\n";
  } else if (incomplete > 0) {
    out += std::to_string(incomplete);
    out += " rank(s) never finished\n";
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file '" + path + "'");
  out << content;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

}  // namespace collsight
