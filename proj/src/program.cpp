// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/program.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace collsight {

std::vector<RankId> executing_ranks(const CollOpSpec& op,
                                    const Topology& topo) {
  if (op.op_name == OpName::Send) return {op.src};
  if (op.op_name == OpName::Recv) return {op.dst};
  return topo.group(op.group).members;
}

bool rank_executes(const CollOpSpec& op, RankId rank, const Topology& topo) {
  if (op.op_name == OpName::Send) return op.src == rank;
  if (op.op_name == OpName::Recv) return op.dst == rank;
  const auto& members = topo.group(op.group).members;
  return std::find(members.begin(), members.end(), rank) != members.end();
}

OpProgram default_program(const Topology& topo, std::uint64_t msg_bytes) {
  if (msg_bytes == 0) throw ConfigError("default_program: msg_bytes must be > 0");
  OpProgram program;
  auto dp_groups = topo.groups_of_kind(GroupKind::DP);
  auto pp_groups = topo.groups_of_kind(GroupKind::PP);
  auto tp_groups = topo.groups_of_kind(GroupKind::TP);

  // prev[r] is the rank's most recent op of this iteration, used to chain the
  // stage schedule in program order.
  std::map<RankId, OpSeq> prev;
  auto chain_deps = [&](const std::vector<RankId>& ranks) {
    std::vector<OpSeq> deps;
    for (RankId r : ranks) {
      auto it = prev.find(r);
      if (it == prev.end()) continue;
      if (std::find(deps.begin(), deps.end(), it->second) == deps.end())
        deps.push_back(it->second);
    }
    std::sort(deps.begin(), deps.end());
    return deps;
  };
  auto emit = [&](CollOpSpec op) {
    op.op_seq = static_cast<OpSeq>(program.ops.size());
    for (RankId r : executing_ranks(op, topo)) prev[r] = op.op_seq;
    program.ops.push_back(std::move(op));
    return program.ops.back().op_seq;
  };

  // send_of[(pp comm_id, hop)] -> Send op_seq, for pairing stage-k receives.
  std::map<std::pair<CommId, int>, OpSeq> send_of;

  for (int stage = 0; stage < topo.pp; ++stage) {
    if (stage > 0) {
      for (const CommGroup* g : pp_groups) {
        CollOpSpec op;
        op.op_name = OpName::Recv;
        op.group = g->comm_id;
        op.msg_bytes = msg_bytes;
        op.src = g->members[static_cast<std::size_t>(stage - 1)];
        op.dst = g->members[static_cast<std::size_t>(stage)];
        const OpSeq send_seq = send_of.at({g->comm_id, stage - 1});
        op.depends_on = chain_deps({op.dst});
        if (std::find(op.depends_on.begin(), op.depends_on.end(), send_seq) ==
            op.depends_on.end())
          op.depends_on.push_back(send_seq);
        std::sort(op.depends_on.begin(), op.depends_on.end());
        op.paired = send_seq;
        const OpSeq recv_seq = emit(op);
        program.ops[static_cast<std::size_t>(send_seq)].paired = recv_seq;
      }
    }
    for (const CommGroup* g : tp_groups) {
      if (topo.pp_index(g->members.front()) != stage) continue;
      if (g->members.size() < 2) continue;
      CollOpSpec op;
      op.op_name = OpName::AllGather;
      op.group = g->comm_id;
      op.msg_bytes = msg_bytes;
      op.depends_on = chain_deps(g->members);
      emit(op);
    }
    if (stage + 1 < topo.pp) {
      for (const CommGroup* g : pp_groups) {
        CollOpSpec op;
        op.op_name = OpName::Send;
        op.group = g->comm_id;
        op.msg_bytes = msg_bytes;
        op.src = g->members[static_cast<std::size_t>(stage)];
        op.dst = g->members[static_cast<std::size_t>(stage + 1)];
        op.depends_on = chain_deps({op.src});
        send_of[{g->comm_id, stage}] = emit(op);
      }
    }
    for (const CommGroup* g : dp_groups) {
      if (topo.pp_index(g->members.front()) != stage) continue;
      if (g->members.size() < 2) continue;
      CollOpSpec rs;
      rs.op_name = OpName::ReduceScatter;
      rs.group = g->comm_id;
      rs.msg_bytes = msg_bytes;
      rs.depends_on = chain_deps(g->members);
      const OpSeq rs_seq = emit(rs);

      CollOpSpec ag;
      ag.op_name = OpName::AllGather;
      ag.group = g->comm_id;
      ag.msg_bytes = msg_bytes;
      ag.depends_on = {rs_seq};
      emit(ag);
    }
  }

  validate_program(program, topo);
  return program;
}

void validate_program(const OpProgram& program, const Topology& topo) {
  for (std::size_t i = 0; i < program.ops.size(); ++i) {
    const CollOpSpec& op = program.ops[i];
    if (op.op_seq != static_cast<OpSeq>(i))
      throw ConfigError("program: op_seq must equal position " +
                        std::to_string(i));
    if (op.msg_bytes == 0)
      throw ConfigError("program: op " + std::to_string(i) +
                        " has msg_bytes 0");
    topo.group(op.group);  // throws on unknown comm_id
    for (OpSeq dep : op.depends_on) {
      if (dep < 0 || dep >= op.op_seq)
        throw ConfigError("program: op " + std::to_string(op.op_seq) +
                          " depends on non-earlier op " + std::to_string(dep));
    }
    if (op.op_name == OpName::Send || op.op_name == OpName::Recv) {
      if (op.src < 0 || op.dst < 0 || op.src == op.dst)
        throw ConfigError("program: p2p op " + std::to_string(op.op_seq) +
                          " needs distinct src and dst");
    }
  }
  if (kahn_order(program).size() != program.ops.size())
    throw ConfigError("program: dependency graph has a cycle");
}

std::vector<OpSeq> kahn_order(const OpProgram& program) {
  const std::size_t n = program.ops.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out_edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (OpSeq dep : program.ops[i].depends_on) {
      if (dep < 0 || static_cast<std::size_t>(dep) >= n) return {};
      out_edges[static_cast<std::size_t>(dep)].push_back(i);
      ++indegree[i];
    }
  }
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::vector<OpSeq> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t i = ready.front();
    ready.pop_front();
    order.push_back(static_cast<OpSeq>(i));
    for (std::size_t j : out_edges[i])
      if (--indegree[j] == 0) ready.push_back(j);
  }
  if (order.size() != n) return {};
  return order;
}

}  // namespace collsight
