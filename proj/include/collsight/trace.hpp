// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "collsight/topology.hpp"
#include "collsight/types.hpp"

namespace collsight {

// Emitted once per (rank, flow, op) when the operation finishes on the rank.
// start_ms is the flow's first wire activity, end_ms its last.
struct CompletionRecord {
  NodeId node = 0;
  CommId comm_id = 0;
  RankId rank = 0;
  int channel = 0;
  OpSeq op_seq = 0;
  OpName op_name = OpName::AllGather;
  std::uint64_t msg_bytes = 0;
  TimeMs start_ms = 0;
  TimeMs end_ms = 0;
};

// Periodic in-flight snapshot of one flow's chunk pipeline counters.
struct StateRecord {
  NodeId node = 0;
  CommId comm_id = 0;
  RankId rank = 0;
  int channel = 0;
  OpSeq op_seq = 0;
  TimeMs window_end_ms = 0;
  TimeMs stuck_ms = 0;
  std::uint64_t total_chunks = 0;
  std::uint64_t gpu_ready = 0;
  std::uint64_t rdma_transmitted = 0;
  std::uint64_t rdma_done = 0;
};

struct TraceRecord {
  std::variant<CompletionRecord, StateRecord> body;

  bool is_completion() const {
    return std::holds_alternative<CompletionRecord>(body);
  }
  const CompletionRecord* completion() const {
    return std::get_if<CompletionRecord>(&body);
  }
  const StateRecord* state() const { return std::get_if<StateRecord>(&body); }

  RankId rank() const;
  NodeId node() const;
  CommId comm_id() const;
  OpSeq op_seq() const;
  int channel() const;
  TimeMs timestamp() const;  // end_ms for completions, window_end_ms for states
};

// Throws DataError when the record violates its type invariants.
void validate_record(const TraceRecord& rec);

// Fixed-capacity overwrite-oldest buffer between the simulator and the
// consuming agent. Single writer, single reading agent; the writer never
// blocks: when full it steals the oldest slot and counts the drop.
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity);

  RingBuffer(const RingBuffer&) = delete;
  RingBuffer& operator=(const RingBuffer&) = delete;

  // Validates, then appends. O(1).
  void emit(const TraceRecord& rec);
  std::optional<TraceRecord> pop();

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t dropped_count() const {
    return dropped_.load(std::memory_order_relaxed);
  }
  std::uint64_t emitted_count() const {
    return tail_.load(std::memory_order_relaxed);
  }

 private:
  std::size_t capacity_;
  std::vector<TraceRecord> slots_;
  std::atomic<std::uint64_t> head_{0};
  std::atomic<std::uint64_t> tail_{0};
  std::atomic<std::uint64_t> dropped_{0};
};

// Append-only in-memory record index. Mutation is single-threaded; reads are
// safe once a drain has completed.
class TraceStore {
 public:
  void append(const TraceRecord& rec);

  std::size_t size() const { return records_.size(); }
  const TraceRecord& at(std::size_t i) const { return records_[i]; }
  const std::vector<TraceRecord>& records() const { return records_; }

  // Records of the given ranks with timestamp in [t0, t1], ordered by time
  // then rank (stable on ties).
  std::vector<TraceRecord> query(std::span<const RankId> ranks, TimeMs t0,
                                 TimeMs t1) const;

  // Per member, the most recent record at or before t; absent when none.
  // Returned indices point into records().
  std::vector<std::pair<RankId, std::size_t>> last_log_per_rank(
      const CommGroup& group, TimeMs t) const;

 private:
  std::vector<TraceRecord> records_;
};

// Moves everything buffered into the store in emission order; returns the
// count moved.
std::size_t drain(RingBuffer& buf, TraceStore& store);

// Line-delimited serialization. One record per line, fixed field order,
// bit-exact round trip.
std::string serialize_record(const TraceRecord& rec);
TraceRecord parse_record(std::string_view line, int line_no);

std::string serialize_records(std::span<const TraceRecord> records);
std::vector<TraceRecord> parse_trace_text(std::string_view text);
std::vector<TraceRecord> load_trace_file(const std::string& path);

}  // namespace collsight
