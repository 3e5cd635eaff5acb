#pragma once

// Round-driven network simulation: four arbitrated slots per round over all n
// nodes, per-round metrics, omniscient termination detection and runtime
// invariant checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uie/channel.hpp"
#include "uie/core.hpp"
#include "uie/node.hpp"
#include "uie/random.hpp"

namespace uie {

inline constexpr double kDefaultZeta = 1.0 / 32.0;

enum class TraceMode { Full, SummaryOnly };

inline double log2_nodes(std::uint64_t n) { return std::log2(static_cast<double>(n)); }

struct SimConfig {
  std::uint32_t nodes = 2;
  std::uint32_t sources = 1;
  std::uint32_t channels = 1;
  double zeta = kDefaultZeta;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> max_rounds;
  TraceMode trace_mode = TraceMode::Full;
  // Initial p of every source node, replacing zeta.
  std::optional<double> initial_p_override;
  // Suppress deactivation so the active set stays fixed.
  bool hold_active = false;
  // Run check_invariants after every round and collect violations.
  bool check_invariants = false;

  // 64 (k/F + F log2 n) + 10^4 unless overridden.
  std::uint64_t round_cap() const {
    if (max_rounds) return *max_rounds;
    const double bound = static_cast<double>(sources) / channels + channels * log2_nodes(nodes);
    return static_cast<std::uint64_t>(std::ceil(64.0 * bound)) + 10'000;
  }

  void validate() const {
    if (nodes < 1) throw std::invalid_argument("need at least one node");
    if (sources < 1 || sources > nodes)
      throw std::invalid_argument("sources must satisfy 1 <= k <= n (k=" + std::to_string(sources) +
                                  ", n=" + std::to_string(nodes) + ")");
    if (channels < 1) throw std::invalid_argument("need at least one channel");
    if (!(zeta > 0.0 && zeta < 0.5)) throw std::invalid_argument("zeta must lie in (0, 1/2)");
    if (initial_p_override && !(*initial_p_override > 0.0 && *initial_p_override <= zeta))
      throw std::invalid_argument("initial p must lie in (0, zeta]");
  }
};

struct RoundTrace {
  std::uint64_t t = 0;
  std::uint32_t active = 0;  // |A_t| at the start of the round
  double sum_p = 0.0;        // over A_t, start of round
  double sum_q = 0.0;
  std::uint32_t d2 = 0;  // deactivations in slot 2
  std::uint32_t d4 = 0;  // deactivations in slot 4
  std::uint32_t s1 = 0;  // successful slot-1 transmissions
  bool s3 = false;       // successful slot-3 transmission
  std::uint32_t crowded_channels = 0;  // channels picked by >= 2 active nodes in slot 1

  friend bool operator==(const RoundTrace&, const RoundTrace&) = default;
};

enum class SimStatus { Completed, RoundCapExceeded };

struct SimResult {
  SimStatus status = SimStatus::RoundCapExceeded;
  std::uint64_t rounds = 0;  // rounds executed
  std::optional<std::uint64_t> completion_round;
  std::optional<std::uint64_t> first_single_active_round;
  std::optional<std::uint64_t> first_below_flogn_round;
  std::vector<RoundTrace> traces;
  std::vector<std::string> violations;
};

// Invariants that must hold at every round boundary:
//   (a) while some node is active, the active nodes jointly hold all k packets;
//   (b) every p and q lies in (0, zeta];
//   (c) the active set only shrinks (checked when `previous` is supplied).
// `shared` is a set implicitly held by every node (see Network::broadcast).
inline std::vector<std::string> check_invariants(std::span<const NodeState> nodes,
                                                 std::size_t sources, double zeta,
                                                 std::span<const Activity> previous = {},
                                                 const PacketSet* shared = nullptr) {
  std::vector<std::string> out;
  bool any_active = false;
  PacketSet united = shared != nullptr ? *shared : PacketSet(sources);
  bool full = united.is_full();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeState& s = nodes[i];
    if (!(s.p > 0.0 && s.p <= zeta)) out.push_back("node " + std::to_string(i) + ": p out of range");
    if (!(s.q > 0.0 && s.q <= zeta)) out.push_back("node " + std::to_string(i) + ": q out of range");
    if (!s.active()) continue;
    any_active = true;
    if (!full) {
      united.merge(s.packets);
      full = united.is_full();
    }
    if (i < previous.size() && previous[i] == Activity::Inactive)
      out.push_back("node " + std::to_string(i) + ": reactivated");
  }
  if (any_active && !full)
    out.push_back("active nodes hold " + std::to_string(united.count()) + " of " +
                  std::to_string(sources) + " packets");
  return out;
}

// The whole network. Node i < k is the source of packet i.
//
// Every successful primary-channel transmission reaches every node other than
// its sender, so the union of those payloads is tracked once in broadcast()
// instead of being copied into each listener; a node's packets are
// nodes()[i].packets merged with broadcast(). Since broadcast() only grows and
// is held by everyone, slot-1 messages may carry the sender's own part alone.
// Inactive nodes in slots 3-4 are submitted to the arbiter as uniform groups.
template <RandomSource R = StreamRandom>
class Network {
 public:
  explicit Network(const SimConfig& config)
    requires std::constructible_from<R, std::uint64_t, std::uint64_t>
      : Network(config, make_streams(config)) {}

  Network(const SimConfig& config, std::vector<R> streams)
      : config_(config), rand_(std::move(streams)), broadcast_(config.sources) {
    config_.validate();
    if (rand_.size() != config_.nodes)
      throw std::invalid_argument("need one random stream per node");
    nodes_.reserve(config_.nodes);
    for (std::uint32_t i = 0; i < config_.nodes; ++i) {
      const bool source = i < config_.sources;
      nodes_.push_back(init_node(source, source ? std::optional(PacketId{i}) : std::nullopt,
                                 config_.zeta, config_.sources));
      if (source) {
        if (config_.initial_p_override) nodes_.back().p = *config_.initial_p_override;
        active_.push_back(i);
      }
    }
  }

  const SimConfig& config() const { return config_; }
  std::span<const NodeState> nodes() const { return nodes_; }
  const PacketSet& broadcast() const { return broadcast_; }
  std::size_t active_count() const { return active_.size(); }
  std::uint64_t round() const { return round_; }

  PacketSet packets_of(NodeId v) const {
    return merge_packets(nodes_.at(v.value).packets, broadcast_);
  }

  // Every node holds all k packets and no node is active.
  bool complete() const {
    if (!active_.empty()) return false;
    if (broadcast_.is_full()) return true;
    return std::all_of(nodes_.begin(), nodes_.end(), [&](const NodeState& s) {
      return merge_packets(s.packets, broadcast_).is_full();
    });
  }

  std::vector<Activity> activity_snapshot() const {
    std::vector<Activity> a(nodes_.size());
    std::transform(nodes_.begin(), nodes_.end(), a.begin(),
                   [](const NodeState& s) { return s.activity; });
    return a;
  }

  std::vector<std::string> check(std::span<const Activity> previous = {}) const {
    return check_invariants(nodes_, config_.sources, config_.zeta, previous, &broadcast_);
  }

  // Fault injection hook for tests.
  NodeState& mutable_node(NodeId v) { return nodes_.at(v.value); }

  RoundTrace run_round() {
    RoundTrace tr;
    tr.t = round_;
    tr.active = static_cast<std::uint32_t>(active_.size());
    const auto F = config_.channels;
    const double zeta = config_.zeta;

    // Slot 1: contention on random channels.
    entries_.clear();
    for (auto v : active_) {
      tr.sum_p += nodes_[v].p;
      tr.sum_q += nodes_[v].q;
      entries_.push_back({NodeId{v}, decide_slot1(nodes_[v], rand_[v], F)});
    }
    followers_.clear();
    {
      const SlotResolution r = arbitrate(entries_, F);
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        NodeState& s = nodes_[entries_[i].node.value];
        update_after_slot1(s, entries_[i].action, r.observations[i], zeta);
        if (s.memory.transmitted_slot1 || s.memory.received_slot1)
          followers_.push_back(entries_[i].node.value);
      }
      tr.s1 = static_cast<std::uint32_t>(r.successful.size());
      for (std::uint32_t c = 1; c <= F; ++c)
        if (r.transmitter_count[c] + r.listener_count[c] >= 2) ++tr.crowded_channels;
    }

    // Slot 2: acknowledgements on the same channels. Nodes that heard silence
    // or a collision in slot 1 sit this slot out.
    entries_.clear();
    for (auto v : followers_) entries_.push_back({NodeId{v}, decide_slot2(nodes_[v])});
    {
      const SlotResolution r = arbitrate(entries_, F);
      for (std::size_t i = 0; i < entries_.size(); ++i)
        if (deactivate(entries_[i].node, update_after_slot2(nodes_[entries_[i].node.value],
                                                            r.observations[i])))
          ++tr.d2;
    }
    if (tr.d2 > 0) drop_inactive();

    // Slot 3: primary channel; inactive nodes all listen.
    const std::size_t passive = nodes_.size() - active_.size();
    entries_.clear();
    for (auto v : active_) entries_.push_back({NodeId{v}, decide_slot3(nodes_[v], rand_[v])});
    followers_.clear();
    bool passive_received = false;
    {
      const UniformGroup listeners{kPrimaryChannel, SlotAction::Kind::Listen, passive};
      const SlotResolution r = arbitrate(entries_, F, std::span(&listeners, 1));
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        NodeState& s = nodes_[entries_[i].node.value];
        // The payload itself reaches everybody through broadcast_.
        std::optional<ChannelObservation> obs = r.observations[i];
        if (obs && obs->payload() != nullptr) obs = ChannelObservation::ack();
        update_after_slot3(s, entries_[i].action, obs, zeta);
        if (s.memory.transmitted_slot3 || s.memory.received_slot3)
          followers_.push_back(entries_[i].node.value);
        else
          s.memory = SlotMemory{};
      }
      const ChannelObservation primary = r.on_channel(kPrimaryChannel);
      tr.s3 = !r.successful.empty();
      if (primary.is_message() && primary.payload() != nullptr) {
        broadcast_.merge(*primary.payload());
        passive_received = passive > 0;
      }
    }

    // Slot 4: every receiver acknowledges on the primary channel.
    entries_.clear();
    for (auto v : followers_) entries_.push_back({NodeId{v}, decide_slot4(nodes_[v])});
    {
      const UniformGroup ackers{kPrimaryChannel, SlotAction::Kind::TransmitAck,
                                passive_received ? passive : 0};
      const SlotResolution r = arbitrate(entries_, F, std::span(&ackers, 1));
      for (std::size_t i = 0; i < entries_.size(); ++i)
        if (deactivate(entries_[i].node, update_after_slot4(nodes_[entries_[i].node.value],
                                                            r.observations[i])))
          ++tr.d4;
    }
    if (tr.d4 > 0) drop_inactive();

    ++round_;
    return tr;
  }

 private:
  static std::vector<R> make_streams(const SimConfig& config)
    requires std::constructible_from<R, std::uint64_t, std::uint64_t>
  {
    std::vector<R> s;
    s.reserve(config.nodes);
    for (std::uint32_t i = 0; i < config.nodes; ++i) s.emplace_back(config.seed, i);
    return s;
  }

  bool deactivate(NodeId v, bool deactivated) {
    if (deactivated && config_.hold_active) {
      nodes_[v.value].activity = Activity::Active;
      return false;
    }
    return deactivated;
  }

  void drop_inactive() {
    std::erase_if(active_, [&](std::uint32_t v) {
      if (nodes_[v].active()) return false;
      nodes_[v].memory = SlotMemory{};
      return true;
    });
  }

  SimConfig config_;
  std::vector<R> rand_;
  std::vector<NodeState> nodes_;
  std::vector<std::uint32_t> active_;
  PacketSet broadcast_;
  std::vector<ArbitrationEntry> entries_;
  std::vector<std::uint32_t> followers_;
  std::uint64_t round_ = 0;
};

using TraceSink = std::function<void(const RoundTrace&)>;

template <RandomSource R>
SimResult run_network(Network<R>& net, const TraceSink& sink = {}) {
  const SimConfig& config = net.config();
  const std::uint64_t cap = config.round_cap();
  const double threshold = config.channels * log2_nodes(config.nodes);
  SimResult result;
  std::vector<Activity> previous;
  while (true) {
    const std::uint64_t t = net.round();
    if (!result.first_single_active_round && net.active_count() <= 1)
      result.first_single_active_round = t;
    if (!result.first_below_flogn_round && static_cast<double>(net.active_count()) < threshold)
      result.first_below_flogn_round = t;
    if (net.complete()) {
      result.status = SimStatus::Completed;
      result.completion_round = t;
      break;
    }
    if (t >= cap) break;
    if (config.check_invariants) previous = net.activity_snapshot();
    RoundTrace tr = net.run_round();
    if (config.check_invariants && result.violations.size() < 100) {
      for (auto& v : net.check(previous))
        result.violations.push_back("round " + std::to_string(net.round()) + ": " + v);
    }
    if (sink) sink(tr);
    if (config.trace_mode == TraceMode::Full) result.traces.push_back(tr);
  }
  result.rounds = net.round();
  return result;
}

inline SimResult run_simulation(const SimConfig& config, const TraceSink& sink = {}) {
  Network<StreamRandom> net(config);
  return run_network(net, sink);
}

}  // namespace uie
