// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "collsight/topology.hpp"
#include "collsight/types.hpp"

namespace collsight {

// One collective or point-to-point operation of the per-iteration program.
// op_seq is local to the iteration; instance i of the program shifts every
// seq by i * ops_per_iteration. For Send/Recv, src/dst name the endpoints.
struct CollOpSpec {
  OpSeq op_seq = 0;
  OpName op_name = OpName::AllGather;
  CommId group = -1;
  std::uint64_t msg_bytes = 0;
  std::vector<OpSeq> depends_on;
  RankId src = -1;
  RankId dst = -1;
  OpSeq paired = -1;  // Send <-> Recv pairing; -1 for collectives
};

struct OpProgram {
  std::vector<CollOpSpec> ops;  // one iteration, op_seq == index
  std::size_t ops_per_iteration() const { return ops.size(); }
};

// Ranks that actually execute an op: group members for collectives, the
// endpoint for Send/Recv.
std::vector<RankId> executing_ranks(const CollOpSpec& op, const Topology& topo);
bool rank_executes(const CollOpSpec& op, RankId rank, const Topology& topo);

// Per-iteration schedule chaining, per pipeline stage: Recv from the previous
// stage, TP AllGather, Send to the next stage, DP ReduceScatter, DP
// AllGather. Stage k+1 receives depend on stage k sends. Singleton groups
// contribute no ops.
OpProgram default_program(const Topology& topo, std::uint64_t msg_bytes);

// Checks dependency references (earlier seq only, acyclic) and group ids.
void validate_program(const OpProgram& program, const Topology& topo);

// Kahn topological order over depends_on edges; empty result means a cycle.
std::vector<OpSeq> kahn_order(const OpProgram& program);

}  // namespace collsight
