// Copyright 2026 The collsight Authors
// SPDX-License-Identifier: Apache-2.0
#include "collsight/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <unordered_map>

namespace collsight {

void SimConfig::validate() const {
  if (chunk_bytes == 0) throw ConfigError("sim: chunk_bytes must be > 0");
  if (link_bandwidth <= 0) throw ConfigError("sim: link_bandwidth must be > 0");
  if (intra_bandwidth < 0) throw ConfigError("sim: intra_bandwidth must be >= 0");
  if (link_latency_ms <= 0) throw ConfigError("sim: link_latency_ms must be > 0");
  if (ack_latency_ms <= 0) throw ConfigError("sim: ack_latency_ms must be > 0");
  if (copy_rate <= 0) throw ConfigError("sim: copy_rate must be > 0");
  if (reduce_factor < 0) throw ConfigError("sim: reduce_factor must be >= 0");
  if (state_log_window_ms <= 0)
    throw ConfigError("sim: state_log_window_ms must be > 0");
  if (max_sim_ms <= 0) throw ConfigError("sim: max_sim_ms must be > 0");
  if (iterations < 0) throw ConfigError("sim: iterations must be >= 0");
  if (buffer_capacity == 0) throw ConfigError("sim: buffer_capacity must be > 0");
}

const char* to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::NicShutdown: return "nic_shutdown";
    case FaultKind::NicBandwidthLimit: return "nic_bandwidth_limit";
    case FaultKind::PcieDowngrade: return "pcie_downgrade";
    case FaultKind::GpuPowerLimit: return "gpu_power_limit";
    case FaultKind::BackgroundCompute: return "background_compute";
    case FaultKind::BackgroundTraffic: return "background_traffic";
    case FaultKind::ProxyDelay: return "proxy_delay";
  }
  return "?";
}

bool fault_kind_from_string(std::string_view s, FaultKind& out) {
  if (s == "nic_shutdown") out = FaultKind::NicShutdown;
  else if (s == "nic_bandwidth_limit") out = FaultKind::NicBandwidthLimit;
  else if (s == "pcie_downgrade") out = FaultKind::PcieDowngrade;
  else if (s == "gpu_power_limit") out = FaultKind::GpuPowerLimit;
  else if (s == "background_compute") out = FaultKind::BackgroundCompute;
  else if (s == "background_traffic") out = FaultKind::BackgroundTraffic;
  else if (s == "proxy_delay") out = FaultKind::ProxyDelay;
  else return false;
  return true;
}

void validate_faults(const std::vector<FaultSpec>& faults,
                     const Topology& topo) {
  for (const FaultSpec& f : faults) {
    if (f.onset_ms < 0) throw ConfigError("fault: onset_ms must be >= 0");
    if (f.bandwidth_factor <= 0 || f.bandwidth_factor > 1)
      throw ConfigError("fault: bandwidth_factor must be in (0,1]");
    if (f.copy_factor <= 0 || f.copy_factor > 1)
      throw ConfigError("fault: copy_factor must be in (0,1]");
    if (f.delay_prob < 0 || f.delay_prob > 1)
      throw ConfigError("fault: delay_prob must be in [0,1]");
    if (f.delay_ms < 0) throw ConfigError("fault: delay_ms must be >= 0");
    if (f.stop_logs_after_ms < 0)
      throw ConfigError("fault: stop_logs_after_ms must be >= 0");
    switch (f.target) {
      case FaultTarget::Node:
        if (f.node < 0 || static_cast<std::size_t>(f.node) >= topo.nodes.size())
          throw ConfigError("fault: node target " + std::to_string(f.node) +
                            " does not exist");
        break;
      case FaultTarget::Nic:
        if (f.node < 0 || static_cast<std::size_t>(f.node) >= topo.nodes.size())
          throw ConfigError("fault: nic target on unknown node " +
                            std::to_string(f.node));
        if (f.nic < 0 ||
            f.nic >= topo.nodes[static_cast<std::size_t>(f.node)].nic_count)
          throw ConfigError("fault: nic index " + std::to_string(f.nic) +
                            " does not exist on node " + std::to_string(f.node));
        break;
      case FaultTarget::Rank:
        if (f.rank < 0 || f.rank >= topo.world_size())
          throw ConfigError("fault: rank target " + std::to_string(f.rank) +
                            " does not exist");
        break;
    }
  }
}

namespace {

constexpr TimeMs kUnset = -1.0;

struct ChannelCounters {
  std::uint64_t total = 0;
  std::uint64_t staged = 0;
  std::uint64_t transmitted = 0;
  std::uint64_t done = 0;
  std::uint64_t bytes = 0;  // payload carried by this channel over the op
  TimeMs last_change = 0;
  TimeMs first_wire = kUnset;
  TimeMs last_wire = kUnset;
};

struct Arrival {
  int phase;
  int step;
  int idx;
  TimeMs time;
};

// Per (rank, op instance) runtime.
struct OpRt {
  OpSeq global_seq = -1;
  const CollOpSpec* spec = nullptr;
  RankId rank = -1;
  bool active = false;
  bool complete = false;
  TimeMs activate_ms = 0;
  TimeMs complete_ms = 0;

  bool is_ring = false;
  bool is_send = false;
  bool is_recv = false;
  RankId succ = -1;
  RankId pred = -1;
  int ring_n = 0;
  int steps = 0;   // ring transfer steps per phase (n - 1)
  int phases = 1;  // 2 for AllReduce (reduce-scatter then all-gather)

  std::vector<std::uint64_t> chunk_bytes;  // per in-shard chunk index
  std::vector<ChannelCounters> ch;

  std::uint64_t sends_total = 0;
  std::uint64_t sends_acked = 0;
  std::uint64_t arrivals_expected = 0;
  std::uint64_t arrivals_seen = 0;

  // AllReduce gate: the gather phase starts once the reduce phase is done.
  std::uint64_t phase0_sends = 0;
  std::uint64_t phase0_acked = 0;
  std::uint64_t phase0_arr_expected = 0;
  std::uint64_t phase0_arr_seen = 0;
  bool phase1_enqueued = false;

  std::vector<Arrival> buffered;  // arrivals seen before activation
};

struct CopyJob {
  OpSeq op = -1;
  int phase = 0;
  int step = 0;
  int idx = 0;
  double cost_mult = 1.0;
};

struct SendJob {
  OpSeq op = -1;
  int phase = 0;
  int step = 0;
  int idx = 0;
  std::uint64_t bytes = 0;
};

struct FlowRt {
  FlowId id;
  bool inter_node = false;
  NicId src_nic;
  NicId dst_nic;
  double bandwidth = 0;
  double bw_factor = 1.0;
  double extra_ack = 0;
  // A dead egress NIC stops the proxy from posting on it at all: staged
  // chunks pile up ahead of rdma_transmitted.
  bool egress_down = false;
  TimeMs busy_until = 0;
  bool transmitting = false;
  std::deque<SendJob> queue;
};

struct RankRt {
  RankId id = -1;
  double copy_factor = 1.0;
  bool copying = false;
  std::deque<CopyJob> copy_queue;
  std::vector<OpSeq> op_list;  // global seqs, ascending
  std::size_t next_op = 0;     // index of first not-yet-completed op
  bool advancing = false;      // re-entrancy guard for activate_next_ops
  bool silenced = false;
  bool proxy_delay = false;
  double delay_prob = 0;
  double delay_ms = 0;
  TimeMs done_ms = kUnset;
};

enum class EvType : std::uint8_t {
  FaultOnset,
  StopLogs,
  Start,
  CopyDone,
  TransmitDone,
  AckDone,
  WindowTick,
};

struct Ev {
  TimeMs t = 0;
  std::uint64_t seq = 0;
  EvType type = EvType::WindowTick;
  RankId rank = -1;
  OpSeq op = -1;
  int phase = 0;
  int step = 0;
  int idx = 0;
  std::size_t flow = 0;
  std::size_t fault = 0;
};

struct EvLater {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.t != b.t) return a.t > b.t;
    return a.seq > b.seq;
  }
};

struct FlowKeyHash {
  std::size_t operator()(const FlowId& f) const {
    return std::hash<std::uint64_t>()(
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(f.src)) << 40) ^
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(f.dst)) << 8) ^
        static_cast<std::uint64_t>(static_cast<std::uint32_t>(f.channel)));
  }
};

class SimEngine {
 public:
  SimEngine(const Topology& topo, const OpProgram& program,
            const std::vector<FaultSpec>& faults, const SimConfig& cfg,
            const RecordSink& sink)
      : topo_(topo), program_(program), faults_(faults), cfg_(cfg), sink_(sink) {}

  SimSummary run();

 private:
  // setup
  void build_rank_op_lists();
  void materialize_flows();
  OpRt& ensure_op_rt(RankId rank, OpSeq global);
  void activate_next_ops(RankId rank);
  void activate(OpRt& rt);

  // event handlers
  void on_copy_done(const Ev& ev);
  void on_transmit_done(const Ev& ev);
  void on_ack_done(const Ev& ev);
  void on_window_tick(const Ev& ev);
  void apply_fault(const FaultSpec& f);

  // helpers
  const CollOpSpec& spec_of(OpSeq global) const {
    return program_.ops[static_cast<std::size_t>(global) %
                        program_.ops.size()];
  }
  int iteration_of(OpSeq global) const {
    return static_cast<int>(global / static_cast<OpSeq>(program_.ops.size()));
  }
  std::size_t flow_index(RankId src, RankId dst, int channel) const;
  void enqueue_copy(RankId rank, const CopyJob& job);
  void start_next_copy(RankId rank);
  void try_transmit(std::size_t flow_idx);
  void deliver(OpRt& dst_rt, int phase, int step, int idx);
  void process_arrival(OpRt& rt, const Arrival& a);
  void check_completion(OpRt& rt);
  void complete_op(OpRt& rt);
  void emit_state_records(const OpRt& rt, TimeMs window_end, bool flush);
  void push(Ev ev) {
    ev.seq = next_ev_seq_++;
    pq_.push(ev);
  }
  bool fault_active_for_copy(RankId rank) const;
  double effective_copy_rate(RankId rank) const {
    return cfg_.copy_rate * ranks_[static_cast<std::size_t>(rank)].copy_factor;
  }
  bool all_done() const;

  const Topology& topo_;
  const OpProgram& program_;
  const std::vector<FaultSpec>& faults_;
  const SimConfig& cfg_;
  const RecordSink& sink_;

  TimeMs now_ = 0;
  std::uint64_t next_ev_seq_ = 0;
  std::priority_queue<Ev, std::vector<Ev>, EvLater> pq_;
  std::vector<RankRt> ranks_;
  std::vector<FlowRt> flows_;
  std::unordered_map<FlowId, std::size_t, FlowKeyHash> flow_index_;
  // (rank, global op) -> runtime. Keyed per rank to keep lookups local.
  std::vector<std::unordered_map<OpSeq, OpRt>> op_rt_;
  SimSummary summary_;
  std::uint64_t records_ = 0;
};

std::vector<std::uint64_t> split_chunks(std::uint64_t bytes,
                                        std::uint64_t chunk_bytes) {
  std::vector<std::uint64_t> out;
  std::uint64_t left = bytes;
  while (left > 0) {
    const std::uint64_t piece = std::min(left, chunk_bytes);
    out.push_back(piece);
    left -= piece;
  }
  if (out.empty()) out.push_back(bytes);
  return out;
}

void SimEngine::build_rank_op_lists() {
  ranks_.resize(static_cast<std::size_t>(topo_.world_size()));
  op_rt_.resize(ranks_.size());
  for (std::size_t r = 0; r < ranks_.size(); ++r)
    ranks_[r].id = static_cast<RankId>(r);
  const OpSeq opn = static_cast<OpSeq>(program_.ops.size());
  for (int iter = 0; iter < cfg_.iterations; ++iter) {
    for (const CollOpSpec& op : program_.ops) {
      for (RankId r : executing_ranks(op, topo_)) {
        ranks_[static_cast<std::size_t>(r)].op_list.push_back(
            static_cast<OpSeq>(iter) * opn + op.op_seq);
      }
    }
  }
  for (RankRt& rr : ranks_)
    if (rr.op_list.empty()) rr.done_ms = 0;
}

void SimEngine::materialize_flows() {
  auto add_pair = [&](RankId src, RankId dst) {
    for (int ch = 0; ch < topo_.channels_per_pair; ++ch) {
      FlowId id{src, dst, ch};
      if (flow_index_.count(id)) continue;
      FlowRt f;
      f.id = id;
      f.inter_node = !topo_.same_node(src, dst);
      f.src_nic = nic_of(topo_, src, ch);
      f.dst_nic = nic_of(topo_, dst, ch);
      f.bandwidth = f.inter_node ? cfg_.link_bandwidth : cfg_.intra_bw();
      flow_index_[id] = flows_.size();
      flows_.push_back(f);
    }
  };
  for (const CollOpSpec& op : program_.ops) {
    if (op.op_name == OpName::Send || op.op_name == OpName::Recv) {
      add_pair(op.src, op.dst);
      continue;
    }
    const CommGroup& g = topo_.group(op.group);
    if (g.members.size() < 2) continue;
    for (auto [src, dst] : ring_order(g)) add_pair(src, dst);
  }
}

std::size_t SimEngine::flow_index(RankId src, RankId dst, int channel) const {
  return flow_index_.at(FlowId{src, dst, channel});
}

OpRt& SimEngine::ensure_op_rt(RankId rank, OpSeq global) {
  auto& table = op_rt_[static_cast<std::size_t>(rank)];
  auto it = table.find(global);
  if (it != table.end()) return it->second;

  OpRt rt;
  rt.global_seq = global;
  rt.spec = &spec_of(global);
  rt.rank = rank;
  rt.ch.resize(static_cast<std::size_t>(topo_.channels_per_pair));

  const CollOpSpec& spec = *rt.spec;
  switch (spec.op_name) {
    case OpName::Send: {
      rt.is_send = true;
      rt.succ = spec.dst;
      rt.chunk_bytes = split_chunks(spec.msg_bytes, cfg_.chunk_bytes);
      rt.steps = 1;
      for (std::size_t k = 0; k < rt.chunk_bytes.size(); ++k) {
        auto& c = rt.ch[k % rt.ch.size()];
        c.total += 1;
        c.bytes += rt.chunk_bytes[k];
      }
      rt.sends_total = rt.chunk_bytes.size();
      break;
    }
    case OpName::Recv: {
      rt.is_recv = true;
      rt.pred = spec.src;
      rt.chunk_bytes = split_chunks(spec.msg_bytes, cfg_.chunk_bytes);
      rt.steps = 1;
      for (std::size_t k = 0; k < rt.chunk_bytes.size(); ++k) {
        auto& c = rt.ch[k % rt.ch.size()];
        c.total += 1;
        c.bytes += rt.chunk_bytes[k];
      }
      rt.arrivals_expected = rt.chunk_bytes.size();
      break;
    }
    default: {
      const CommGroup& g = topo_.group(spec.group);
      const int n = static_cast<int>(g.members.size());
      rt.is_ring = n >= 2;
      rt.ring_n = n;
      if (rt.is_ring) {
        const auto pos = static_cast<std::size_t>(
            std::find(g.members.begin(), g.members.end(), rank) -
            g.members.begin());
        rt.succ = g.members[(pos + 1) % g.members.size()];
        rt.pred = g.members[(pos + g.members.size() - 1) % g.members.size()];
        rt.steps = n - 1;
        rt.phases = spec.op_name == OpName::AllReduce ? 2 : 1;
        const std::uint64_t shard =
            (spec.msg_bytes + static_cast<std::uint64_t>(n) - 1) /
            static_cast<std::uint64_t>(n);
        rt.chunk_bytes = split_chunks(shard, cfg_.chunk_bytes);
        const std::uint64_t per_phase_sends =
            static_cast<std::uint64_t>(rt.steps) * rt.chunk_bytes.size();
        rt.sends_total = per_phase_sends * static_cast<std::uint64_t>(rt.phases);
        rt.arrivals_expected = rt.sends_total;
        rt.phase0_sends = per_phase_sends;
        rt.phase0_arr_expected = per_phase_sends;
        for (int ph = 0; ph < rt.phases; ++ph) {
          for (int s = 0; s < rt.steps; ++s) {
            for (std::size_t k = 0; k < rt.chunk_bytes.size(); ++k) {
              auto& c = rt.ch[k % rt.ch.size()];
              c.total += 1;
              c.bytes += rt.chunk_bytes[k];
            }
          }
        }
      }
      break;
    }
  }
  return table.emplace(global, std::move(rt)).first->second;
}

void SimEngine::activate(OpRt& rt) {
  rt.active = true;
  rt.activate_ms = now_;
  for (auto& c : rt.ch) c.last_change = now_;

  auto& span = summary_.op_spans[rt.global_seq];
  if (span.first_start_ms < 0 || now_ < span.first_start_ms)
    span.first_start_ms = now_;

  if (rt.is_send || (rt.is_ring && rt.steps > 0)) {
    // Stage the first transfer step; later steps are gated on arrivals.
    const double mult = 1.0;
    for (std::size_t k = 0; k < rt.chunk_bytes.size(); ++k)
      enqueue_copy(rt.rank, CopyJob{rt.global_seq, 0, 0, static_cast<int>(k), mult});
  }
  // Replay anything that arrived while this rank was still on earlier ops.
  std::vector<Arrival> buffered;
  buffered.swap(rt.buffered);
  for (const Arrival& a : buffered) process_arrival(rt, a);
  check_completion(rt);
}

void SimEngine::activate_next_ops(RankId rank) {
  RankRt& rr = ranks_[static_cast<std::size_t>(rank)];
  if (rr.advancing) return;  // the outermost call owns the advance
  rr.advancing = true;
  while (rr.next_op < rr.op_list.size()) {
    OpRt& rt = ensure_op_rt(rank, rr.op_list[rr.next_op]);
    if (rt.complete) {  // a Recv may finish before the rank reaches it
      ++rr.next_op;
      continue;
    }
    if (!rt.active) activate(rt);
    if (!rt.complete) break;
    ++rr.next_op;
  }
  rr.advancing = false;
  if (rr.next_op >= rr.op_list.size() && rr.done_ms < 0) rr.done_ms = now_;
}

void SimEngine::enqueue_copy(RankId rank, const CopyJob& job) {
  RankRt& rr = ranks_[static_cast<std::size_t>(rank)];
  rr.copy_queue.push_back(job);
  if (!rr.copying) start_next_copy(rank);
}

void SimEngine::start_next_copy(RankId rank) {
  RankRt& rr = ranks_[static_cast<std::size_t>(rank)];
  if (rr.copy_queue.empty()) {
    rr.copying = false;
    return;
  }
  rr.copying = true;
  const CopyJob job = rr.copy_queue.front();
  rr.copy_queue.pop_front();
  OpRt& rt = op_rt_[static_cast<std::size_t>(rank)].at(job.op);
  const std::uint64_t bytes = rt.chunk_bytes[static_cast<std::size_t>(job.idx)];
  const double dur =
      static_cast<double>(bytes) * job.cost_mult / effective_copy_rate(rank);
  Ev ev;
  ev.t = now_ + dur;
  ev.type = EvType::CopyDone;
  ev.rank = rank;
  ev.op = job.op;
  ev.phase = job.phase;
  ev.step = job.step;
  ev.idx = job.idx;
  push(ev);
}

void SimEngine::on_copy_done(const Ev& ev) {
  OpRt& rt = op_rt_[static_cast<std::size_t>(ev.rank)].at(ev.op);
  const int channel = ev.idx % topo_.channels_per_pair;
  auto& c = rt.ch[static_cast<std::size_t>(channel)];
  c.staged += 1;
  c.last_change = now_;

  SendJob job;
  job.op = ev.op;
  job.phase = ev.phase;
  job.step = ev.step;
  job.idx = ev.idx;
  job.bytes = rt.chunk_bytes[static_cast<std::size_t>(ev.idx)];
  const std::size_t fi = flow_index(ev.rank, rt.succ, channel);
  flows_[fi].queue.push_back(job);
  try_transmit(fi);

  start_next_copy(ev.rank);
}

void SimEngine::try_transmit(std::size_t flow_idx) {
  FlowRt& f = flows_[flow_idx];
  if (f.transmitting || f.queue.empty() || f.egress_down) return;
  if (f.busy_until > now_) return;  // TransmitDone will retry

  const SendJob job = f.queue.front();
  f.queue.pop_front();

  double delay = 0;
  const RankRt& rr = ranks_[static_cast<std::size_t>(f.id.src)];
  if (rr.proxy_delay && f.inter_node) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(job.phase)) << 48) |
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(job.step)) << 24) |
        static_cast<std::uint64_t>(static_cast<std::uint32_t>(job.idx));
    const double draw =
        uniform01(cfg_.seed, static_cast<std::uint64_t>(f.id.src),
                  static_cast<std::uint64_t>(job.op),
                  static_cast<std::uint64_t>(f.id.channel), key);
    if (draw < rr.delay_prob) delay = rr.delay_ms;
  }

  const double bw = f.bandwidth * f.bw_factor;
  const TimeMs start = now_ + delay;
  const TimeMs done = start + static_cast<double>(job.bytes) / bw +
                      cfg_.link_latency_ms;

  OpRt& rt = op_rt_[static_cast<std::size_t>(f.id.src)].at(job.op);
  auto& c = rt.ch[static_cast<std::size_t>(f.id.channel)];
  if (c.first_wire < 0) c.first_wire = start;

  f.transmitting = true;
  f.busy_until = done;
  Ev ev;
  ev.t = done;
  ev.type = EvType::TransmitDone;
  ev.rank = f.id.src;
  ev.op = job.op;
  ev.phase = job.phase;
  ev.step = job.step;
  ev.idx = job.idx;
  ev.flow = flow_idx;
  push(ev);
}

void SimEngine::on_transmit_done(const Ev& ev) {
  FlowRt& f = flows_[ev.flow];
  f.transmitting = false;
  OpRt& rt = op_rt_[static_cast<std::size_t>(ev.rank)].at(ev.op);
  auto& c = rt.ch[static_cast<std::size_t>(f.id.channel)];
  c.transmitted += 1;
  c.last_change = now_;

  Ev ack = ev;
  ack.type = EvType::AckDone;
  ack.t = now_ + cfg_.ack_latency_ms + f.extra_ack;
  push(ack);

  try_transmit(ev.flow);
}

void SimEngine::on_ack_done(const Ev& ev) {
  FlowRt& f = flows_[ev.flow];
  OpRt& rt = op_rt_[static_cast<std::size_t>(ev.rank)].at(ev.op);
  auto& c = rt.ch[static_cast<std::size_t>(f.id.channel)];
  c.done += 1;
  c.last_change = now_;
  c.last_wire = now_;
  rt.sends_acked += 1;
  if (ev.phase == 0) rt.phase0_acked += 1;

  // The receiver observes the chunk once the sender's ack fires.
  if (rt.is_ring) {
    OpRt& peer = ensure_op_rt(f.id.dst, ev.op);
    deliver(peer, ev.phase, ev.step, ev.idx);
  } else if (rt.is_send && rt.spec->paired >= 0) {
    const OpSeq opn = static_cast<OpSeq>(program_.ops.size());
    const OpSeq paired_global =
        static_cast<OpSeq>(iteration_of(ev.op)) * opn + rt.spec->paired;
    OpRt& peer = ensure_op_rt(f.id.dst, paired_global);
    deliver(peer, ev.phase, ev.step, ev.idx);
  }

  check_completion(rt);
}

void SimEngine::deliver(OpRt& rt, int phase, int step, int idx) {
  const Arrival a{phase, step, idx, now_};
  if (!rt.active) {
    rt.buffered.push_back(a);
    return;
  }
  process_arrival(rt, a);
  check_completion(rt);
}

void SimEngine::process_arrival(OpRt& rt, const Arrival& a) {
  rt.arrivals_seen += 1;
  if (a.phase == 0) rt.phase0_arr_seen += 1;

  if (rt.is_recv) {
    const int channel = a.idx % topo_.channels_per_pair;
    auto& c = rt.ch[static_cast<std::size_t>(channel)];
    c.staged += 1;
    c.transmitted += 1;
    c.done += 1;
    c.last_change = now_;
    if (c.first_wire < 0) c.first_wire = a.time;
    c.last_wire = std::max(c.last_wire, a.time);
    return;
  }

  // Ring step s arrival feeds the step s+1 transfer of the same chunk. The
  // reduce-scatter forward pays an extra reduce on the copy engine.
  if (a.step + 1 < rt.steps) {
    double mult = 1.0;
    const bool reduce_phase =
        rt.spec->op_name == OpName::ReduceScatter ||
        (rt.spec->op_name == OpName::AllReduce && a.phase == 0);
    if (reduce_phase) mult = 1.0 + cfg_.reduce_factor;
    enqueue_copy(rt.rank, CopyJob{rt.global_seq, a.phase, a.step + 1, a.idx, mult});
  }
}

void SimEngine::check_completion(OpRt& rt) {
  if (rt.complete || !rt.active) return;
  // AllReduce: the gather phase starts once the reduce phase is done.
  if (rt.phases == 2 && !rt.phase1_enqueued) {
    if (rt.phase0_arr_seen == rt.phase0_arr_expected &&
        rt.phase0_acked == rt.phase0_sends) {
      rt.phase1_enqueued = true;
      for (std::size_t k = 0; k < rt.chunk_bytes.size(); ++k)
        enqueue_copy(rt.rank,
                     CopyJob{rt.global_seq, 1, 0, static_cast<int>(k), 1.0});
    }
    return;
  }
  if (rt.sends_acked < rt.sends_total) return;
  if (rt.arrivals_seen < rt.arrivals_expected) return;
  complete_op(rt);
}

void SimEngine::complete_op(OpRt& rt) {
  rt.complete = true;
  rt.complete_ms = now_;

  auto& span = summary_.op_spans[rt.global_seq];
  span.completed_ranks += 1;
  span.last_end_ms = std::max(span.last_end_ms, now_);

  const RankRt& rr = ranks_[static_cast<std::size_t>(rt.rank)];
  if (!rr.silenced) {
    // Final per-flow snapshot, then the completion records.
    emit_state_records(rt, now_, /*flush=*/true);
    for (std::size_t chn = 0; chn < rt.ch.size(); ++chn) {
      const ChannelCounters& c = rt.ch[chn];
      if (c.total == 0) continue;
      CompletionRecord rec;
      rec.node = topo_.node_of(rt.rank);
      rec.comm_id = rt.spec->group;
      rec.rank = rt.rank;
      rec.channel = static_cast<int>(chn);
      rec.op_seq = rt.global_seq;
      rec.op_name = rt.spec->op_name;
      rec.msg_bytes = c.bytes;
      rec.start_ms = c.first_wire >= 0 ? c.first_wire : rt.activate_ms;
      rec.end_ms = c.last_wire >= 0 ? c.last_wire : now_;
      if (rec.end_ms < rec.start_ms) rec.end_ms = rec.start_ms;
      TraceRecord out;
      out.body = rec;
      sink_(out);
      ++records_;
    }
  }
  activate_next_ops(rt.rank);
}

void SimEngine::emit_state_records(const OpRt& rt, TimeMs window_end,
                                   bool flush) {
  const RankRt& rr = ranks_[static_cast<std::size_t>(rt.rank)];
  if (rr.silenced) return;
  for (std::size_t chn = 0; chn < rt.ch.size(); ++chn) {
    const ChannelCounters& c = rt.ch[chn];
    if (c.total == 0) continue;
    StateRecord rec;
    rec.node = topo_.node_of(rt.rank);
    rec.comm_id = rt.spec->group;
    rec.rank = rt.rank;
    rec.channel = static_cast<int>(chn);
    rec.op_seq = rt.global_seq;
    rec.window_end_ms = window_end;
    rec.stuck_ms = flush ? 0.0 : window_end - c.last_change;
    rec.total_chunks = c.total;
    rec.gpu_ready = c.staged;
    rec.rdma_transmitted = c.transmitted;
    rec.rdma_done = c.done;
    TraceRecord out;
    out.body = rec;
    sink_(out);
    ++records_;
  }
}

void SimEngine::on_window_tick(const Ev& ev) {
  for (RankRt& rr : ranks_) {
    if (rr.silenced || rr.next_op >= rr.op_list.size()) continue;
    auto it = op_rt_[static_cast<std::size_t>(rr.id)].find(
        rr.op_list[rr.next_op]);
    if (it == op_rt_[static_cast<std::size_t>(rr.id)].end()) continue;
    const OpRt& rt = it->second;
    if (rt.active && !rt.complete) emit_state_records(rt, ev.t, false);
  }
  // Window boundaries are exact multiples of the window, not a running sum.
  const TimeMs next_t =
      static_cast<double>(ev.idx + 1) * cfg_.state_log_window_ms;
  if (!all_done() && next_t <= cfg_.max_sim_ms) {
    Ev next;
    next.t = next_t;
    next.type = EvType::WindowTick;
    next.idx = ev.idx + 1;
    push(next);
  }
}

void SimEngine::apply_fault(const FaultSpec& f) {
  auto side_matches = [&](const NicId& nic) {
    if (f.target == FaultTarget::Nic)
      return nic == NicId{f.node, f.nic};
    if (f.target == FaultTarget::Node) return nic.node == f.node;
    return nic.node == topo_.node_of(f.rank);
  };
  switch (f.kind) {
    case FaultKind::NicShutdown:
      for (FlowRt& flow : flows_)
        if (flow.inter_node && side_matches(flow.src_nic))
          flow.egress_down = true;
      break;
    case FaultKind::NicBandwidthLimit:
      // Egress shaping on the injected NIC(s).
      for (FlowRt& flow : flows_)
        if (flow.inter_node && side_matches(flow.src_nic))
          flow.bw_factor *= f.bandwidth_factor;
      break;
    case FaultKind::BackgroundTraffic:
      for (FlowRt& flow : flows_) {
        if (!flow.inter_node || !side_matches(flow.src_nic)) continue;
        flow.bw_factor *= f.bandwidth_factor;
        flow.extra_ack += f.delay_ms;
      }
      break;
    case FaultKind::PcieDowngrade:
    case FaultKind::GpuPowerLimit:
      ranks_[static_cast<std::size_t>(f.rank)].copy_factor *= f.copy_factor;
      break;
    case FaultKind::BackgroundCompute:
      for (RankId r :
           topo_.nodes[static_cast<std::size_t>(f.node)].ranks)
        ranks_[static_cast<std::size_t>(r)].copy_factor *= f.copy_factor;
      break;
    case FaultKind::ProxyDelay: {
      RankRt& rr = ranks_[static_cast<std::size_t>(f.rank)];
      rr.proxy_delay = true;
      rr.delay_prob = f.delay_prob;
      rr.delay_ms = f.delay_ms;
      break;
    }
  }
}

bool SimEngine::all_done() const {
  for (const RankRt& rr : ranks_)
    if (rr.next_op < rr.op_list.size()) return false;
  return true;
}

SimSummary SimEngine::run() {
  cfg_.validate();
  validate_program(program_, topo_);
  validate_faults(faults_, topo_);

  build_rank_op_lists();
  materialize_flows();

  for (const CollOpSpec& op : program_.ops) {
    for (int iter = 0; iter < cfg_.iterations; ++iter) {
      auto& span = summary_.op_spans[static_cast<OpSeq>(iter) *
                                         static_cast<OpSeq>(program_.ops.size()) +
                                     op.op_seq];
      span.executing_ranks =
          static_cast<int>(executing_ranks(op, topo_).size());
    }
  }

  for (std::size_t i = 0; i < faults_.size(); ++i) {
    Ev ev;
    ev.t = faults_[i].onset_ms;
    ev.type = EvType::FaultOnset;
    ev.fault = i;
    push(ev);
    if (faults_[i].stop_logs_after_ms > 0) {
      Ev stop;
      stop.t = faults_[i].onset_ms + faults_[i].stop_logs_after_ms;
      stop.type = EvType::StopLogs;
      stop.fault = i;
      push(stop);
    }
  }
  if (cfg_.iterations > 0) {
    Ev tick;
    tick.t = cfg_.state_log_window_ms;
    tick.type = EvType::WindowTick;
    tick.idx = 1;
    push(tick);
  }
  {
    // Activation runs as an event so that onset-0 faults apply first.
    Ev start;
    start.t = 0;
    start.type = EvType::Start;
    push(start);
  }

  while (!pq_.empty()) {
    if (all_done()) break;
    const Ev ev = pq_.top();
    if (ev.t > cfg_.max_sim_ms) break;
    pq_.pop();
    now_ = ev.t;
    ++summary_.events_processed;
    switch (ev.type) {
      case EvType::FaultOnset:
        apply_fault(faults_[ev.fault]);
        // A queued flow may already be idle at a rate the fault changed;
        // nothing to do, rates are read at transmit start.
        break;
      case EvType::StopLogs: {
        const FaultSpec& f = faults_[ev.fault];
        if (f.target == FaultTarget::Rank) {
          ranks_[static_cast<std::size_t>(f.rank)].silenced = true;
        } else {
          for (RankId r :
               topo_.nodes[static_cast<std::size_t>(f.node)].ranks)
            ranks_[static_cast<std::size_t>(r)].silenced = true;
        }
        break;
      }
      case EvType::Start:
        for (RankRt& rr : ranks_) activate_next_ops(rr.id);
        break;
      case EvType::CopyDone:
        on_copy_done(ev);
        break;
      case EvType::TransmitDone:
        on_transmit_done(ev);
        break;
      case EvType::AckDone:
        on_ack_done(ev);
        break;
      case EvType::WindowTick:
        on_window_tick(ev);
        break;
    }
  }

  summary_.completed = all_done();
  summary_.end_ms = now_;
  summary_.records_emitted = records_;
  summary_.rank_completion_ms.resize(ranks_.size(), kUnset);
  for (std::size_t r = 0; r < ranks_.size(); ++r)
    summary_.rank_completion_ms[r] = ranks_[r].done_ms;

  if (!summary_.completed && cfg_.iterations > 0) {
    bool fault_explains = false;
    for (const FaultSpec& f : faults_)
      if (f.onset_ms <= cfg_.max_sim_ms) fault_explains = true;
    if (!fault_explains)
      throw SimInternalError(
          "simulation wedged with unfinished operations and no fault to "
          "explain it");
  }
  return summary_;
}

}  // namespace

SimSummary run_simulation(const Topology& topo, const OpProgram& program,
                          const std::vector<FaultSpec>& faults,
                          const SimConfig& cfg, const RecordSink& sink) {
  SimEngine engine(topo, program, faults, cfg, sink);
  return engine.run();
}

}  // namespace collsight
