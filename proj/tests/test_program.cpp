// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <set>

#include "collsight/program.hpp"

using namespace collsight;

TEST_CASE("default program for the 32-rank layout") {
  const Topology topo = build_layout(8, 2, 2, 8, 2, 4);
  const OpProgram program = default_program(topo, 64ull << 20);

  int sends = 0, recvs = 0, tp_ag = 0, dp_rs = 0, dp_ag = 0;
  for (const CollOpSpec& op : program.ops) {
    const GroupKind kind = topo.group(op.group).kind;
    switch (op.op_name) {
      case OpName::Send:
        ++sends;
        CHECK(kind == GroupKind::PP);
        break;
      case OpName::Recv:
        ++recvs;
        CHECK(kind == GroupKind::PP);
        break;
      case OpName::AllGather:
        if (kind == GroupKind::TP) ++tp_ag;
        else ++dp_ag;
        break;
      case OpName::ReduceScatter:
        ++dp_rs;
        CHECK(kind == GroupKind::DP);
        break;
      default:
        FAIL("unexpected op kind");
    }
  }
  CHECK(sends == 16);  // one hop per PP group
  CHECK(recvs == 16);
  CHECK(tp_ag == 4);
  CHECK(dp_rs == 16);
  CHECK(dp_ag == 16);

  // Second-stage receives depend on first-stage sends of the same PP group.
  for (const CollOpSpec& op : program.ops) {
    if (op.op_name != OpName::Recv) continue;
    REQUIRE(op.paired >= 0);
    const CollOpSpec& send = program.ops[static_cast<std::size_t>(op.paired)];
    CHECK(send.op_name == OpName::Send);
    CHECK(send.group == op.group);
    CHECK(send.paired == op.op_seq);
    CHECK(std::find(op.depends_on.begin(), op.depends_on.end(), send.op_seq) !=
          op.depends_on.end());
  }

  // Every rank's DP ReduceScatter sits behind its PP send.
  for (const CollOpSpec& op : program.ops) {
    if (op.op_name != OpName::ReduceScatter) continue;
    const CommGroup& g = topo.group(op.group);
    if (topo.pp_index(g.members.front()) != 0) continue;
    bool behind_send = false;
    for (OpSeq dep : op.depends_on)
      if (program.ops[static_cast<std::size_t>(dep)].op_name == OpName::Send)
        behind_send = true;
    CHECK(behind_send);
  }
}

TEST_CASE("no pipeline edges without pipeline stages") {
  const Topology topo = build_layout(4, 1, 2, 4, 2, 4);
  const OpProgram program = default_program(topo, 16ull << 20);
  for (const CollOpSpec& op : program.ops) {
    CHECK(op.op_name != OpName::Send);
    CHECK(op.op_name != OpName::Recv);
  }
}

TEST_CASE("singleton groups contribute no ops") {
  const Topology topo = build_layout(1, 1, 1, 1, 1);
  const OpProgram program = default_program(topo, 1024);
  CHECK(program.ops.empty());
}

TEST_CASE("dependency graph is acyclic by Kahn's algorithm") {
  const Topology topo = build_layout(8, 2, 2, 8, 2, 4);
  const OpProgram program = default_program(topo, 64ull << 20);
  const std::vector<OpSeq> order = kahn_order(program);
  REQUIRE(order.size() == program.ops.size());
  // Kahn order respects every edge.
  std::vector<std::size_t> position(program.ops.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    position[static_cast<std::size_t>(order[i])] = i;
  for (const CollOpSpec& op : program.ops)
    for (OpSeq dep : op.depends_on)
      CHECK(position[static_cast<std::size_t>(dep)] <
            position[static_cast<std::size_t>(op.op_seq)]);
}

TEST_CASE("program validation rejects forward and dangling references") {
  const Topology topo = build_layout(2, 1, 2, 4, 1, 4);
  OpProgram program = default_program(topo, 1024);
  REQUIRE(!program.ops.empty());
  program.ops[0].depends_on.push_back(static_cast<OpSeq>(program.ops.size()));
  CHECK_THROWS_AS(validate_program(program, topo), ConfigError);
}

TEST_CASE("executing ranks") {
  const Topology topo = build_layout(8, 2, 2, 8, 2, 4);
  const OpProgram program = default_program(topo, 64ull << 20);
  for (const CollOpSpec& op : program.ops) {
    const auto ranks = executing_ranks(op, topo);
    if (op.op_name == OpName::Send) {
      CHECK(ranks == std::vector<RankId>{op.src});
    } else if (op.op_name == OpName::Recv) {
      CHECK(ranks == std::vector<RankId>{op.dst});
    } else {
      CHECK(ranks == topo.group(op.group).members);
    }
    for (RankId r : ranks) CHECK(rank_executes(op, r, topo));
  }
}
