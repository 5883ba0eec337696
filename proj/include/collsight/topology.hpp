// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "collsight/types.hpp"

namespace collsight {

enum class GroupKind : std::uint8_t { DP, PP, TP };

const char* to_string(GroupKind kind);

// One communication group. Members are kept in ring order.
struct CommGroup {
  CommId comm_id = -1;
  GroupKind kind = GroupKind::DP;
  std::vector<RankId> members;
};

struct NodeInfo {
  NodeId id = -1;
  std::vector<RankId> ranks;
  int nic_count = 0;
};

// Immutable cluster and parallelism layout. Safe to share across readers
// after construction.
struct Topology {
  int tp = 1;
  int pp = 1;
  int dp = 1;
  int ranks_per_node = 1;
  int channels_per_pair = 1;
  int nics_per_node = 1;

  std::vector<NodeInfo> nodes;
  std::vector<CommGroup> groups;  // comm_id == index

  int world_size() const { return tp * pp * dp; }
  NodeId node_of(RankId rank) const { return rank / ranks_per_node; }

  // Rank index decomposes as rank = dp_i*(pp*tp) + pp_i*tp + tp_i.
  int tp_index(RankId rank) const { return static_cast<int>(rank) % tp; }
  int pp_index(RankId rank) const { return (static_cast<int>(rank) / tp) % pp; }
  int dp_index(RankId rank) const { return static_cast<int>(rank) / (tp * pp); }

  const CommGroup& group(CommId id) const;
  const CommGroup& group_of(RankId rank, GroupKind kind) const;
  std::vector<CommId> groups_of(RankId rank) const;
  std::vector<const CommGroup*> groups_of_kind(GroupKind kind) const;
  bool same_node(RankId a, RankId b) const { return node_of(a) == node_of(b); }
};

// Lays out tp*pp*dp ranks over nodes of ranks_per_node each and builds the
// DP/PP/TP groups. TP stays intra-node, so tp must not exceed ranks_per_node.
Topology build_layout(int tp, int pp, int dp, int ranks_per_node,
                      int channels_per_pair, int nics_per_node = 4);

// Ring edges (members[i] -> members[i+1 mod n]). Groups of one have no ring.
std::vector<std::pair<RankId, RankId>> ring_order(const CommGroup& group);

// The channels_per_pair flows between two distinct ranks.
std::vector<FlowId> flows_between(RankId a, RankId b, const Topology& topo);

// NIC serving one endpoint of a flow: round-robin over the node's NICs by
// channel index.
NicId nic_of(const Topology& topo, RankId endpoint, int channel);

}  // namespace collsight
