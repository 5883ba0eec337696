// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace collsight {

using RankId = std::int32_t;
using NodeId = std::int32_t;
using CommId = std::int32_t;
using OpSeq = std::int64_t;
using TimeMs = double;

// One NIC port, addressed by host and local index.
struct NicId {
  NodeId node = -1;
  int index = -1;
  friend auto operator<=>(const NicId&, const NicId&) = default;
};

// One network path between a rank pair. Chunks of an operation are spread
// round-robin over the channels of the pair; one queue pair per channel.
struct FlowId {
  RankId src = -1;
  RankId dst = -1;
  int channel = 0;
  friend auto operator<=>(const FlowId&, const FlowId&) = default;
};

enum class OpName : std::uint8_t {
  AllGather,
  ReduceScatter,
  AllReduce,
  Send,
  Recv,
};

const char* to_string(OpName name);
bool op_name_from_string(std::string_view s, OpName& out);

// Invalid or inconsistent configuration. Mapped to exit code 2 at the CLI.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed trace input. Carries the 1-based line number. Exit code 3.
class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// A record or analysis input violating its own invariants.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The event loop wedged with work outstanding and no injected fault to
// explain it.
class SimInternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stateless counter-based mixing; the only randomness source in the project.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

// Uniform draw in [0, 1) keyed by (seed, a, b, c, d). The same key always
// yields the same value, independent of call order.
inline double uniform01(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                        std::uint64_t c, std::uint64_t d) {
  std::uint64_t h = mix64(seed, mix64(a, mix64(b, mix64(c, d))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace collsight
