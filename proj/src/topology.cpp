// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/topology.hpp"

#include <algorithm>
#include <stdexcept>

namespace collsight {

const char* to_string(OpName name) {
  switch (name) {
    case OpName::AllGather:
      return "AllGather";
    case OpName::ReduceScatter:
      return "ReduceScatter";
    case OpName::AllReduce:
      return "AllReduce";
    case OpName::Send:
      return "Send";
    case OpName::Recv:
      return "Recv";
  }
  return "?";
}

bool op_name_from_string(std::string_view s, OpName& out) {
  if (s == "AllGather") out = OpName::AllGather;
  else if (s == "ReduceScatter") out = OpName::ReduceScatter;
  else if (s == "AllReduce") out = OpName::AllReduce;
  else if (s == "Send") out = OpName::Send;
  else if (s == "Recv") out = OpName::Recv;
  else return false;
  return true;
}

const char* to_string(GroupKind kind) {
  switch (kind) {
    case GroupKind::DP:
      return "DP";
    case GroupKind::PP:
      return "PP";
    case GroupKind::TP:
      return "TP";
  }
  return "?";
}

const CommGroup& Topology::group(CommId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= groups.size())
    throw ConfigError("unknown comm_id " + std::to_string(id));
  return groups[static_cast<std::size_t>(id)];
}

const CommGroup& Topology::group_of(RankId rank, GroupKind kind) const {
  for (const CommGroup& g : groups) {
    if (g.kind != kind) continue;
    if (std::find(g.members.begin(), g.members.end(), rank) != g.members.end())
      return g;
  }
  throw ConfigError("rank " + std::to_string(rank) + " has no " +
                    std::string(to_string(kind)) + " group");
}

std::vector<CommId> Topology::groups_of(RankId rank) const {
  std::vector<CommId> out;
  for (const CommGroup& g : groups) {
    if (std::find(g.members.begin(), g.members.end(), rank) != g.members.end())
      out.push_back(g.comm_id);
  }
  return out;
}

std::vector<const CommGroup*> Topology::groups_of_kind(GroupKind kind) const {
  std::vector<const CommGroup*> out;
  for (const CommGroup& g : groups)
    if (g.kind == kind) out.push_back(&g);
  return out;
}

Topology build_layout(int tp, int pp, int dp, int ranks_per_node,
                      int channels_per_pair, int nics_per_node) {
  if (tp < 1 || pp < 1 || dp < 1 || ranks_per_node < 1 ||
      channels_per_pair < 1 || nics_per_node < 1)
    throw ConfigError("layout: all dimensions must be >= 1");
  const int world = tp * pp * dp;
  if (world % ranks_per_node != 0)
    throw ConfigError("layout: world size " + std::to_string(world) +
                      " not divisible by ranks_per_node " +
                      std::to_string(ranks_per_node));
  if (tp > ranks_per_node)
    throw ConfigError("layout: tp " + std::to_string(tp) +
                      " exceeds ranks_per_node " +
                      std::to_string(ranks_per_node) +
                      " (TP must stay intra-node)");

  Topology topo;
  topo.tp = tp;
  topo.pp = pp;
  topo.dp = dp;
  topo.ranks_per_node = ranks_per_node;
  topo.channels_per_pair = channels_per_pair;
  topo.nics_per_node = nics_per_node;

  const int node_count = world / ranks_per_node;
  topo.nodes.reserve(static_cast<std::size_t>(node_count));
  for (NodeId n = 0; n < node_count; ++n) {
    NodeInfo info;
    info.id = n;
    info.nic_count = nics_per_node;
    for (int i = 0; i < ranks_per_node; ++i)
      info.ranks.push_back(n * ranks_per_node + i);
    topo.nodes.push_back(std::move(info));
  }

  // comm_ids are sequential in construction order: DP, then PP, then TP.
  CommId next_id = 0;
  for (int pp_i = 0; pp_i < pp; ++pp_i) {
    for (int tp_i = 0; tp_i < tp; ++tp_i) {
      CommGroup g;
      g.comm_id = next_id++;
      g.kind = GroupKind::DP;
      for (int dp_i = 0; dp_i < dp; ++dp_i)
        g.members.push_back(dp_i * (pp * tp) + pp_i * tp + tp_i);
      topo.groups.push_back(std::move(g));
    }
  }
  for (int dp_i = 0; dp_i < dp; ++dp_i) {
    for (int tp_i = 0; tp_i < tp; ++tp_i) {
      CommGroup g;
      g.comm_id = next_id++;
      g.kind = GroupKind::PP;
      for (int pp_i = 0; pp_i < pp; ++pp_i)
        g.members.push_back(dp_i * (pp * tp) + pp_i * tp + tp_i);
      topo.groups.push_back(std::move(g));
    }
  }
  for (int dp_i = 0; dp_i < dp; ++dp_i) {
    for (int pp_i = 0; pp_i < pp; ++pp_i) {
      CommGroup g;
      g.comm_id = next_id++;
      g.kind = GroupKind::TP;
      for (int tp_i = 0; tp_i < tp; ++tp_i)
        g.members.push_back(dp_i * (pp * tp) + pp_i * tp + tp_i);
      topo.groups.push_back(std::move(g));
    }
  }
  return topo;
}

std::vector<std::pair<RankId, RankId>> ring_order(const CommGroup& group) {
  const std::size_t n = group.members.size();
  if (n < 2)
    throw ConfigError("ring_order: group " + std::to_string(group.comm_id) +
                      " has fewer than 2 members");
  std::vector<std::pair<RankId, RankId>> edges;
  edges.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    edges.emplace_back(group.members[i], group.members[(i + 1) % n]);
  return edges;
}

std::vector<FlowId> flows_between(RankId a, RankId b, const Topology& topo) {
  if (a == b)
    throw ConfigError("flows_between: self-flow for rank " + std::to_string(a));
  std::vector<FlowId> flows;
  flows.reserve(static_cast<std::size_t>(topo.channels_per_pair));
  for (int ch = 0; ch < topo.channels_per_pair; ++ch)
    flows.push_back(FlowId{a, b, ch});
  return flows;
}

NicId nic_of(const Topology& topo, RankId endpoint, int channel) {
  const NodeId node = topo.node_of(endpoint);
  const int nics = topo.nodes[static_cast<std::size_t>(node)].nic_count;
  return NicId{node, channel % nics};
}

}  // namespace collsight
