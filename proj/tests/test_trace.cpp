// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "collsight/trace.hpp"

using namespace collsight;

namespace {

TraceRecord completion(RankId rank, TimeMs end, OpSeq op = 0, int channel = 0,
                       std::uint64_t bytes = 1024) {
  CompletionRecord c;
  c.node = rank / 8;
  c.comm_id = 1;
  c.rank = rank;
  c.channel = channel;
  c.op_seq = op;
  c.op_name = OpName::AllGather;
  c.msg_bytes = bytes;
  c.start_ms = end > 1 ? end - 1 : 0;
  c.end_ms = end;
  TraceRecord rec;
  rec.body = c;
  return rec;
}

TraceRecord state(RankId rank, TimeMs window_end, OpSeq op = 0, int channel = 0,
                  std::uint64_t staged = 4, std::uint64_t transmitted = 3,
                  std::uint64_t done = 2) {
  StateRecord s;
  s.node = rank / 8;
  s.comm_id = 1;
  s.rank = rank;
  s.channel = channel;
  s.op_seq = op;
  s.window_end_ms = window_end;
  s.stuck_ms = 0;
  s.total_chunks = 8;
  s.gpu_ready = staged;
  s.rdma_transmitted = transmitted;
  s.rdma_done = done;
  TraceRecord rec;
  rec.body = s;
  return rec;
}

TraceRecord random_record(std::mt19937_64& rng) {
  const RankId rank = static_cast<RankId>(rng() % 32);
  const TimeMs ts = static_cast<double>(rng() % 100000) / 10.0;
  const OpSeq op = static_cast<OpSeq>(rng() % 500);
  const int channel = static_cast<int>(rng() % 4);
  if (rng() % 2 == 0)
    return completion(rank, ts, op, channel, 1 + rng() % 4096);
  const std::uint64_t done = rng() % 8;
  const std::uint64_t transmitted = done + rng() % 8;
  const std::uint64_t staged = transmitted + rng() % 8;
  TraceRecord rec = state(rank, ts, op, channel, staged, transmitted, done);
  std::get<StateRecord>(rec.body).total_chunks = staged + rng() % 8;
  std::get<StateRecord>(rec.body).stuck_ms = static_cast<double>(rng() % 100);
  return rec;
}

}  // namespace

TEST_CASE("ring buffer append and overwrite semantics") {
  RingBuffer buf(4);
  buf.emit(completion(0, 1.0));
  buf.emit(completion(1, 2.0));
  buf.emit(completion(2, 3.0));
  CHECK(buf.size() == 3);
  CHECK(buf.dropped_count() == 0);

  buf.emit(completion(3, 4.0));
  buf.emit(completion(4, 5.0));  // full: rank-0 record is overwritten
  CHECK(buf.size() == 4);
  CHECK(buf.dropped_count() == 1);

  auto first = buf.pop();
  REQUIRE(first.has_value());
  CHECK(first->rank() == 1);
}

TEST_CASE("invariant-violating records are rejected at emit") {
  RingBuffer buf(4);
  TraceRecord bad = state(0, 10.0, 0, 0, /*staged=*/2, /*transmitted=*/1,
                          /*done=*/3);  // done > transmitted
  CHECK_THROWS_AS(buf.emit(bad), DataError);

  TraceRecord reversed = completion(0, 5.0);
  std::get<CompletionRecord>(reversed.body).start_ms = 9.0;
  CHECK_THROWS_AS(buf.emit(reversed), DataError);
  CHECK(buf.size() == 0);
}

TEST_CASE("drain moves everything in emission order") {
  RingBuffer buf(16);
  TraceStore store;
  buf.emit(completion(0, 1.0));
  buf.emit(completion(1, 2.0));
  buf.emit(completion(2, 3.0));
  CHECK(drain(buf, store) == 3);
  CHECK(buf.size() == 0);
  CHECK(store.size() == 3);
  CHECK(drain(buf, store) == 0);
}

TEST_CASE("interleaved emit and drain preserve per-rank order") {
  std::mt19937_64 rng(7);
  RingBuffer buf(64);
  TraceStore store;
  std::vector<std::uint64_t> next_seq(8, 0);
  // Sequence numbers ride in op_seq; 10^4 random emit/drain interleavings.
  for (int i = 0; i < 10000; ++i) {
    if (rng() % 3 != 0) {
      const RankId rank = static_cast<RankId>(rng() % 8);
      buf.emit(completion(rank, static_cast<double>(i),
                          static_cast<OpSeq>(next_seq[rank]++)));
    } else {
      drain(buf, store);
    }
  }
  drain(buf, store);
  std::vector<std::uint64_t> seen(8, 0);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const TraceRecord& rec = store.at(i);
    CHECK(rec.op_seq() == static_cast<OpSeq>(seen[rec.rank()]));
    seen[rec.rank()] += 1;
    ++total;
  }
  std::uint64_t emitted = 0;
  for (auto v : next_seq) emitted += v;
  CHECK(total == emitted);  // capacity 64 never overflowed under this schedule
}

TEST_CASE("emitted = drained + buffered + dropped") {
  std::mt19937_64 rng(11);
  RingBuffer buf(8);
  TraceStore store;
  for (int i = 0; i < 1000; ++i) {
    buf.emit(completion(static_cast<RankId>(rng() % 4),
                        static_cast<double>(i)));
    if (rng() % 5 == 0) drain(buf, store);
    CHECK(buf.size() <= buf.capacity());
  }
  CHECK(buf.emitted_count() ==
        store.size() + buf.size() + buf.dropped_count());
}

TEST_CASE("query matches a brute-force scan") {
  std::mt19937_64 rng(3);
  TraceStore store;
  std::vector<TraceRecord> all;
  for (int i = 0; i < 1000; ++i) {
    TraceRecord rec = random_record(rng);
    store.append(rec);
    all.push_back(rec);
  }
  for (int trial = 0; trial < 100; ++trial) {
    TimeMs t0 = static_cast<double>(rng() % 10000);
    TimeMs t1 = t0 + static_cast<double>(rng() % 4000);
    std::vector<RankId> ranks;
    for (RankId r = 0; r < 32; ++r)
      if (rng() % 3 == 0) ranks.push_back(r);
    if (ranks.empty()) ranks.push_back(0);

    std::vector<TraceRecord> expected;
    for (const TraceRecord& rec : all) {
      if (rec.timestamp() < t0 || rec.timestamp() > t1) continue;
      if (std::find(ranks.begin(), ranks.end(), rec.rank()) == ranks.end())
        continue;
      expected.push_back(rec);
    }
    std::stable_sort(expected.begin(), expected.end(),
                     [](const TraceRecord& a, const TraceRecord& b) {
                       if (a.timestamp() != b.timestamp())
                         return a.timestamp() < b.timestamp();
                       return a.rank() < b.rank();
                     });

    const auto got = store.query(ranks, t0, t1);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(serialize_record(got[i]) == serialize_record(expected[i]));
  }
  CHECK_THROWS_AS(store.query(std::vector<RankId>{0}, 10.0, 5.0), DataError);
}

TEST_CASE("query on an empty store") {
  TraceStore store;
  CHECK(store.query(std::vector<RankId>{0, 1}, 0.0, 100.0).empty());
}

TEST_CASE("last log per rank") {
  TraceStore store;
  CommGroup g;
  g.comm_id = 1;
  g.members = {0, 1, 2};

  store.append(completion(0, 10.0, 5));
  store.append(state(0, 11.0, 6));
  store.append(completion(1, 50.0, 9));  // after the query point
  store.append(state(2, 9.0, 4));
  store.append(state(2, 9.0, 5));  // same timestamp: the later append wins

  auto last = store.last_log_per_rank(g, 20.0);
  REQUIRE(last.size() == 2);  // rank 1 has nothing at or before t
  CHECK(last[0].first == 0);
  CHECK(store.at(last[0].second).op_seq() == 6);
  CHECK(last[1].first == 2);
  CHECK(store.at(last[1].second).op_seq() == 5);

  // Two records at t-1 and t: the one at t wins.
  store.append(completion(1, 19.0, 1));
  store.append(completion(1, 20.0, 2));
  last = store.last_log_per_rank(g, 20.0);
  REQUIRE(last.size() == 3);
  CHECK(store.at(last[1].second).op_seq() == 2);
}

TEST_CASE("last log matches brute-force max-timestamp scan") {
  std::mt19937_64 rng(17);
  TraceStore store;
  for (int i = 0; i < 1000; ++i) store.append(random_record(rng));
  CommGroup g;
  g.comm_id = 1;
  for (RankId r = 0; r < 32; ++r) g.members.push_back(r);

  for (TimeMs t : {0.0, 123.4, 5000.0, 20000.0}) {
    const auto got = store.last_log_per_rank(g, t);
    for (RankId r : g.members) {
      const TraceRecord* expected = nullptr;
      for (std::size_t i = 0; i < store.size(); ++i) {
        const TraceRecord& rec = store.at(i);
        if (rec.rank() != r || rec.timestamp() > t) continue;
        if (!expected || rec.timestamp() >= expected->timestamp())
          expected = &rec;
      }
      const auto it = std::find_if(got.begin(), got.end(),
                                   [&](const auto& p) { return p.first == r; });
      if (!expected) {
        CHECK(it == got.end());
      } else {
        REQUIRE(it != got.end());
        CHECK(serialize_record(store.at(it->second)) ==
              serialize_record(*expected));
      }
    }
  }
}

TEST_CASE("serialization round trip is the identity") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 1000; ++i) {
    const TraceRecord rec = random_record(rng);
    const std::string line = serialize_record(rec);
    const TraceRecord back = parse_record(line, 1);
    CHECK(serialize_record(back) == line);
  }
}

TEST_CASE("empty input parses to empty output") {
  CHECK(parse_trace_text("").empty());
  CHECK(serialize_records(std::vector<TraceRecord>{}).empty());
}

TEST_CASE("parse errors carry the line number and the field") {
  const std::string good = serialize_record(completion(3, 12.5, 7));
  // Drop rdma_done from a state line.
  std::string missing =
      "{\"type\":\"state\",\"node\":0,\"comm_id\":1,\"rank\":5,\"channel\":0,"
      "\"op_seq\":2,\"window_end_ms\":100,\"stuck_ms\":0,\"total_chunks\":8,"
      "\"gpu_ready\":4,\"rdma_transmitted\":3}";
  try {
    parse_trace_text(good + "\n" + missing + "\n");
    FAIL("expected a parse error");
  } catch (const TraceParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("rdma_done") != std::string::npos);
  }

  // Unknown fields are rejected.
  std::string unknown = good;
  unknown.insert(unknown.size() - 1, ",\"extra\":1");
  CHECK_THROWS_AS(parse_record(unknown, 1), TraceParseError);

  CHECK_THROWS_AS(parse_record("not json", 4), TraceParseError);
}

TEST_CASE("state counters must be monotone across the pipeline") {
  std::string bad =
      "{\"type\":\"state\",\"node\":0,\"comm_id\":1,\"rank\":5,\"channel\":0,"
      "\"op_seq\":2,\"window_end_ms\":100,\"stuck_ms\":0,\"total_chunks\":8,"
      "\"gpu_ready\":4,\"rdma_transmitted\":3,\"rdma_done\":5}";
  CHECK_THROWS_AS(parse_record(bad, 1), TraceParseError);
}
