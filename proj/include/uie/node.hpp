#pragma once

// Per-node UIE state machine. A round has four slots:
//   1-2  active nodes contend on a uniformly chosen channel with probability p;
//        a receiver acknowledges in slot 2 and a transmitter that hears the
//        acknowledgement (or a collision of acknowledgements) deactivates.
//   3-4  everybody meets on the primary channel; active nodes contend with
//        probability q, every receiver acknowledges, and an acknowledged
//        transmitter deactivates.
// p and q follow the same rule: double (capped at zeta) after hearing an idle
// channel, halve otherwise.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "uie/core.hpp"
#include "uie/random.hpp"

namespace uie {

enum class ProbUpdateEvent : std::uint8_t { TransmittedSelf, ObservedIdle, ReceivedMessage, ObservedBusy };

inline NodeState init_node(bool is_source, std::optional<PacketId> packet, double zeta,
                           std::size_t universe) {
  if (packet.has_value() != is_source)
    throw std::invalid_argument(is_source ? "source node needs a packet"
                                          : "non-source node cannot hold a packet");
  NodeState s;
  s.p = zeta;
  s.q = zeta;
  s.packets = PacketSet(universe);
  if (is_source) {
    if (packet->value >= universe) throw std::invalid_argument("packet id outside universe");
    s.packets.insert(*packet);
    s.activity = Activity::Active;
  }
  return s;
}

inline double update_probability(double w, ProbUpdateEvent event, double zeta) {
  return event == ProbUpdateEvent::ObservedIdle ? std::min(2.0 * w, zeta) : w / 2.0;
}

namespace detail {

// Shared update for the two contention slots (1 and 3): merges a received
// payload and returns the event that drives the probability update.
inline ProbUpdateEvent absorb(NodeState& s, const SlotAction& action,
                              const std::optional<ChannelObservation>& obs, bool& transmitted,
                              bool& received) {
  if (action.is_transmit()) {
    transmitted = true;
    return ProbUpdateEvent::TransmittedSelf;
  }
  if (!obs) throw std::invalid_argument("listener needs an observation");
  if (obs->is_idle()) return ProbUpdateEvent::ObservedIdle;
  if (obs->is_message()) {
    if (obs->payload() != nullptr) s.packets.merge(*obs->payload());
    received = true;
    return ProbUpdateEvent::ReceivedMessage;
  }
  return ProbUpdateEvent::ObservedBusy;
}

inline bool hears_activity(const std::optional<ChannelObservation>& obs) {
  return obs && (obs->is_message() || obs->is_collision());
}

}  // namespace detail

template <RandomSource R>
SlotAction decide_slot1(NodeState& s, R& rand, std::uint32_t channels) {
  if (!s.active()) return SlotAction::noop();
  const Channel r = rand.pick_channel(channels);
  s.memory.selected = r;
  return rand.bernoulli(s.p) ? SlotAction::transmit_data(r, s.packets) : SlotAction::listen(r);
}

inline void update_after_slot1(NodeState& s, const SlotAction& action,
                               const std::optional<ChannelObservation>& obs, double zeta) {
  if (!s.active() || action.is_noop()) return;
  const auto event =
      detail::absorb(s, action, obs, s.memory.transmitted_slot1, s.memory.received_slot1);
  s.p = update_probability(s.p, event, zeta);
}

inline SlotAction decide_slot2(const NodeState& s) {
  if (!s.active()) return SlotAction::noop();
  if (s.memory.received_slot1) return SlotAction::transmit_ack(s.memory.selected);
  if (s.memory.transmitted_slot1) return SlotAction::listen(s.memory.selected);
  return SlotAction::noop();
}

// Returns true iff the node deactivated.
inline bool update_after_slot2(NodeState& s, const std::optional<ChannelObservation>& obs) {
  if (!s.active() || !s.memory.transmitted_slot1) return false;
  if (!detail::hears_activity(obs)) return false;
  s.activity = Activity::Inactive;
  return true;
}

template <RandomSource R>
SlotAction decide_slot3(const NodeState& s, R& rand) {
  if (!s.active()) return SlotAction::listen(kPrimaryChannel);
  return rand.bernoulli(s.q) ? SlotAction::transmit_data(kPrimaryChannel, s.packets)
                             : SlotAction::listen(kPrimaryChannel);
}

inline void update_after_slot3(NodeState& s, const SlotAction& action,
                               const std::optional<ChannelObservation>& obs, double zeta) {
  if (action.is_noop()) return;
  if (!s.active()) {
    if (obs && obs->is_message()) {
      if (obs->payload() != nullptr) s.packets.merge(*obs->payload());
      s.memory.received_slot3 = true;
    }
    return;
  }
  const auto event =
      detail::absorb(s, action, obs, s.memory.transmitted_slot3, s.memory.received_slot3);
  s.q = update_probability(s.q, event, zeta);
}

inline SlotAction decide_slot4(const NodeState& s) {
  if (s.memory.received_slot3) return SlotAction::transmit_ack(kPrimaryChannel);
  if (s.active() && s.memory.transmitted_slot3) return SlotAction::listen(kPrimaryChannel);
  return SlotAction::noop();
}

// Returns true iff the node deactivated. Clears the round's slot memory.
inline bool update_after_slot4(NodeState& s, const std::optional<ChannelObservation>& obs) {
  bool deactivated = false;
  if (s.active() && s.memory.transmitted_slot3 && detail::hears_activity(obs)) {
    s.activity = Activity::Inactive;
    deactivated = true;
  }
  s.memory = SlotMemory{};
  return deactivated;
}

}  // namespace uie
