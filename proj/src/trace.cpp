// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace collsight {

RankId TraceRecord::rank() const {
  return is_completion() ? completion()->rank : state()->rank;
}

NodeId TraceRecord::node() const {
  return is_completion() ? completion()->node : state()->node;
}

CommId TraceRecord::comm_id() const {
  return is_completion() ? completion()->comm_id : state()->comm_id;
}

OpSeq TraceRecord::op_seq() const {
  return is_completion() ? completion()->op_seq : state()->op_seq;
}

int TraceRecord::channel() const {
  return is_completion() ? completion()->channel : state()->channel;
}

TimeMs TraceRecord::timestamp() const {
  return is_completion() ? completion()->end_ms : state()->window_end_ms;
}

void validate_record(const TraceRecord& rec) {
  if (const CompletionRecord* c = rec.completion()) {
    if (c->end_ms < c->start_ms)
      throw DataError("completion record with end_ms < start_ms");
    if (c->msg_bytes == 0) throw DataError("completion record with msg_bytes 0");
    if (c->rank < 0 || c->channel < 0)
      throw DataError("completion record with negative rank or channel");
  } else {
    const StateRecord* s = rec.state();
    if (!(s->total_chunks >= s->gpu_ready && s->gpu_ready >= s->rdma_transmitted &&
          s->rdma_transmitted >= s->rdma_done))
      throw DataError(
          "state record violates total >= gpu_ready >= rdma_transmitted >= "
          "rdma_done");
    if (s->stuck_ms < 0) throw DataError("state record with negative stuck_ms");
    if (s->rank < 0 || s->channel < 0)
      throw DataError("state record with negative rank or channel");
  }
}

RingBuffer::RingBuffer(std::size_t capacity)
    : capacity_(capacity), slots_(capacity) {
  if (capacity == 0) throw ConfigError("ring buffer capacity must be > 0");
}

void RingBuffer::emit(const TraceRecord& rec) {
  validate_record(rec);
  const std::uint64_t t = tail_.load(std::memory_order_relaxed);
  for (;;) {
    std::uint64_t h = head_.load(std::memory_order_acquire);
    if (t - h < capacity_) break;
    // Full: steal the oldest slot instead of blocking.
    if (head_.compare_exchange_strong(h, h + 1, std::memory_order_acq_rel)) {
      dropped_.fetch_add(1, std::memory_order_relaxed);
      break;
    }
  }
  slots_[t % capacity_] = rec;
  tail_.store(t + 1, std::memory_order_release);
}

std::optional<TraceRecord> RingBuffer::pop() {
  for (;;) {
    std::uint64_t h = head_.load(std::memory_order_acquire);
    const std::uint64_t t = tail_.load(std::memory_order_acquire);
    if (h == t) return std::nullopt;
    TraceRecord copy = slots_[h % capacity_];
    // The writer may have stolen this slot mid-copy; only hand the copy out
    // if we still owned the head.
    if (head_.compare_exchange_strong(h, h + 1, std::memory_order_acq_rel))
      return copy;
  }
}

std::size_t RingBuffer::size() const {
  const std::uint64_t t = tail_.load(std::memory_order_acquire);
  const std::uint64_t h = head_.load(std::memory_order_acquire);
  return static_cast<std::size_t>(t - h);
}

void TraceStore::append(const TraceRecord& rec) { records_.push_back(rec); }

std::vector<TraceRecord> TraceStore::query(std::span<const RankId> ranks,
                                           TimeMs t0, TimeMs t1) const {
  if (t0 > t1) throw DataError("query: t0 > t1");
  std::vector<TraceRecord> out;
  for (const TraceRecord& rec : records_) {
    const TimeMs ts = rec.timestamp();
    if (ts < t0 || ts > t1) continue;
    if (std::find(ranks.begin(), ranks.end(), rec.rank()) == ranks.end())
      continue;
    out.push_back(rec);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TraceRecord& a, const TraceRecord& b) {
                     if (a.timestamp() != b.timestamp())
                       return a.timestamp() < b.timestamp();
                     return a.rank() < b.rank();
                   });
  return out;
}

std::vector<std::pair<RankId, std::size_t>> TraceStore::last_log_per_rank(
    const CommGroup& group, TimeMs t) const {
  if (group.members.empty())
    throw DataError("last_log_per_rank: empty group");
  std::vector<std::pair<RankId, std::size_t>> out;
  for (RankId member : group.members) {
    bool found = false;
    std::size_t best = 0;
    TimeMs best_ts = 0;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const TraceRecord& rec = records_[i];
      if (rec.rank() != member) continue;
      const TimeMs ts = rec.timestamp();
      if (ts > t) continue;
      if (!found || ts >= best_ts) {  // later append wins on equal timestamps
        found = true;
        best = i;
        best_ts = ts;
      }
    }
    if (found) out.emplace_back(member, best);
  }
  return out;
}

std::size_t drain(RingBuffer& buf, TraceStore& store) {
  std::size_t moved = 0;
  while (std::optional<TraceRecord> rec = buf.pop()) {
    store.append(*rec);
    ++moved;
  }
  return moved;
}

namespace {

void append_double(std::string& out, double v) {
  char tmp[64];
  auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
  (void)ec;
  out.append(tmp, ptr);
}

void append_u64(std::string& out, std::uint64_t v) {
  char tmp[32];
  auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
  (void)ec;
  out.append(tmp, ptr);
}

void append_i64(std::string& out, std::int64_t v) {
  char tmp[32];
  auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
  (void)ec;
  out.append(tmp, ptr);
}

const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                    int line_no) {
  auto it = j.find(key);
  if (it == j.end())
    throw TraceParseError(line_no,
                          std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

std::string serialize_record(const TraceRecord& rec) {
  std::string out;
  out.reserve(192);
  if (const CompletionRecord* c = rec.completion()) {
    out += "{\"type\":\"completion\",\"node\":";
    append_i64(out, c->node);
    out += ",\"comm_id\":";
    append_i64(out, c->comm_id);
    out += ",\"rank\":";
    append_i64(out, c->rank);
    out += ",\"channel\":";
    append_i64(out, c->channel);
    out += ",\"op_seq\":";
    append_i64(out, c->op_seq);
    out += ",\"op_name\":\"";
    out += to_string(c->op_name);
    out += "\",\"msg_bytes\":";
    append_u64(out, c->msg_bytes);
    out += ",\"start_ms\":";
    append_double(out, c->start_ms);
    out += ",\"end_ms\":";
    append_double(out, c->end_ms);
    out += "}";
  } else {
    const StateRecord* s = rec.state();
    out += "{\"type\":\"state\",\"node\":";
    append_i64(out, s->node);
    out += ",\"comm_id\":";
    append_i64(out, s->comm_id);
    out += ",\"rank\":";
    append_i64(out, s->rank);
    out += ",\"channel\":";
    append_i64(out, s->channel);
    out += ",\"op_seq\":";
    append_i64(out, s->op_seq);
    out += ",\"window_end_ms\":";
    append_double(out, s->window_end_ms);
    out += ",\"stuck_ms\":";
    append_double(out, s->stuck_ms);
    out += ",\"total_chunks\":";
    append_u64(out, s->total_chunks);
    out += ",\"gpu_ready\":";
    append_u64(out, s->gpu_ready);
    out += ",\"rdma_transmitted\":";
    append_u64(out, s->rdma_transmitted);
    out += ",\"rdma_done\":";
    append_u64(out, s->rdma_done);
    out += "}";
  }
  return out;
}

TraceRecord parse_record(std::string_view line, int line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw TraceParseError(line_no, "not valid JSON");
  if (!j.is_object()) throw TraceParseError(line_no, "record is not an object");

  const std::string type = require_field(j, "type", line_no).get<std::string>();
  static const char* kCompletionFields[] = {
      "type",    "node",      "comm_id",  "rank",    "channel",
      "op_seq",  "op_name",   "msg_bytes", "start_ms", "end_ms"};
  static const char* kStateFields[] = {
      "type",         "node",      "comm_id",          "rank",
      "channel",      "op_seq",    "window_end_ms",    "stuck_ms",
      "total_chunks", "gpu_ready", "rdma_transmitted", "rdma_done"};

  auto check_unknown = [&](std::span<const char* const> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* f : allowed)
        if (it.key() == f) {
          ok = true;
          break;
        }
      if (!ok)
        throw TraceParseError(line_no, "unknown field '" + it.key() + "'");
    }
  };

  TraceRecord rec;
  if (type == "completion") {
    check_unknown(kCompletionFields);
    CompletionRecord c;
    c.node = require_field(j, "node", line_no).get<NodeId>();
    c.comm_id = require_field(j, "comm_id", line_no).get<CommId>();
    c.rank = require_field(j, "rank", line_no).get<RankId>();
    c.channel = require_field(j, "channel", line_no).get<int>();
    c.op_seq = require_field(j, "op_seq", line_no).get<OpSeq>();
    const std::string name =
        require_field(j, "op_name", line_no).get<std::string>();
    if (!op_name_from_string(name, c.op_name))
      throw TraceParseError(line_no, "unknown op_name '" + name + "'");
    c.msg_bytes = require_field(j, "msg_bytes", line_no).get<std::uint64_t>();
    c.start_ms = require_field(j, "start_ms", line_no).get<double>();
    c.end_ms = require_field(j, "end_ms", line_no).get<double>();
    rec.body = c;
  } else if (type == "state") {
    check_unknown(kStateFields);
    StateRecord s;
    s.node = require_field(j, "node", line_no).get<NodeId>();
    s.comm_id = require_field(j, "comm_id", line_no).get<CommId>();
    s.rank = require_field(j, "rank", line_no).get<RankId>();
    s.channel = require_field(j, "channel", line_no).get<int>();
    s.op_seq = require_field(j, "op_seq", line_no).get<OpSeq>();
    s.window_end_ms = require_field(j, "window_end_ms", line_no).get<double>();
    s.stuck_ms = require_field(j, "stuck_ms", line_no).get<double>();
    s.total_chunks =
        require_field(j, "total_chunks", line_no).get<std::uint64_t>();
    s.gpu_ready = require_field(j, "gpu_ready", line_no).get<std::uint64_t>();
    s.rdma_transmitted =
        require_field(j, "rdma_transmitted", line_no).get<std::uint64_t>();
    s.rdma_done = require_field(j, "rdma_done", line_no).get<std::uint64_t>();
    rec.body = s;
  } else {
    throw TraceParseError(line_no, "unknown record type '" + type + "'");
  }

  try {
    validate_record(rec);
  } catch (const DataError& e) {
    throw TraceParseError(line_no, e.what());
  }
  return rec;
}

std::string serialize_records(std::span<const TraceRecord> records) {
  std::string out;
  for (const TraceRecord& rec : records) {
    out += serialize_record(rec);
    out += '\n';
  }
  return out;
}

std::vector<TraceRecord> parse_trace_text(std::string_view text) {
  std::vector<TraceRecord> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    if (!line.empty()) out.push_back(parse_record(line, line_no));
    pos = eol + 1;
  }
  return out;
}

std::vector<TraceRecord> load_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw TraceParseError(0, "cannot open trace file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trace_text(ss.str());
}

}  // namespace collsight
