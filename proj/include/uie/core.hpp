#pragma once

// Domain types shared by the channel model, the protocol state machine and
// the simulation engine. No protocol logic lives here.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <utility>

#include <boost/dynamic_bitset.hpp>

namespace uie {

struct NodeId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

struct PacketId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(PacketId, PacketId) = default;
};

// Channels are numbered 1..F; channel 1 is the primary channel.
struct Channel {
  std::uint32_t value = 1;
  friend constexpr auto operator<=>(Channel, Channel) = default;
};

inline constexpr Channel kPrimaryChannel{1};

// Set of packet ids drawn from a fixed universe {0, ..., k-1}.
class PacketSet {
 public:
  PacketSet() = default;
  explicit PacketSet(std::size_t universe) : bits_(universe) {}

  static PacketSet full(std::size_t universe) {
    PacketSet s(universe);
    s.bits_.set();
    return s;
  }

  std::size_t universe() const { return bits_.size(); }
  std::size_t count() const { return bits_.count(); }
  bool empty() const { return bits_.none(); }
  bool is_full() const { return bits_.all(); }

  bool contains(PacketId id) const {
    return id.value < bits_.size() && bits_.test(id.value);
  }

  void insert(PacketId id) { bits_.set(id.value); }

  // In-place union. Both sets must share the same universe.
  PacketSet& merge(const PacketSet& other) {
    bits_ |= other.bits_;
    return *this;
  }

  bool is_subset_of(const PacketSet& other) const {
    return bits_.is_subset_of(other.bits_);
  }

  friend bool operator==(const PacketSet& a, const PacketSet& b) {
    return a.bits_ == b.bits_;
  }

 private:
  boost::dynamic_bitset<std::uint64_t> bits_;
};

inline PacketSet merge_packets(PacketSet a, const PacketSet& b) {
  a.merge(b);
  return a;
}

enum class Activity : std::uint8_t { Active, Inactive };

// Per-round scratch. Cleared at every round boundary.
struct SlotMemory {
  Channel selected{};
  bool transmitted_slot1 = false;
  bool received_slot1 = false;
  bool transmitted_slot3 = false;
  bool received_slot3 = false;

  friend bool operator==(const SlotMemory&, const SlotMemory&) = default;
};

struct NodeState {
  Activity activity = Activity::Inactive;
  double p = 0.0;  // multi-channel transmission probability
  double q = 0.0;  // primary-channel transmission probability
  PacketSet packets;
  SlotMemory memory;

  bool active() const { return activity == Activity::Active; }
};

// What a listener perceives on its channel during one slot. A data message
// borrows the transmitter's packet set for the duration of the slot; an
// acknowledgement carries no payload.
class ChannelObservation {
 public:
  enum class Kind : std::uint8_t { Idle, Message, Collision };

  static constexpr ChannelObservation idle() { return ChannelObservation(Kind::Idle, nullptr); }
  static constexpr ChannelObservation collision() {
    return ChannelObservation(Kind::Collision, nullptr);
  }
  static constexpr ChannelObservation ack() { return ChannelObservation(Kind::Message, nullptr); }
  static constexpr ChannelObservation data(const PacketSet& payload) {
    return ChannelObservation(Kind::Message, &payload);
  }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_idle() const { return kind_ == Kind::Idle; }
  constexpr bool is_message() const { return kind_ == Kind::Message; }
  constexpr bool is_collision() const { return kind_ == Kind::Collision; }
  constexpr bool is_ack() const { return kind_ == Kind::Message && payload_ == nullptr; }
  // Null unless this is a data message.
  constexpr const PacketSet* payload() const { return payload_; }

 private:
  constexpr ChannelObservation(Kind kind, const PacketSet* payload)
      : kind_(kind), payload_(payload) {}

  Kind kind_;
  const PacketSet* payload_;
};

// One node's action in one slot. TransmitData borrows the node's packet set.
class SlotAction {
 public:
  enum class Kind : std::uint8_t { NoOp, Listen, TransmitData, TransmitAck };

  constexpr SlotAction() = default;

  static constexpr SlotAction noop() { return {}; }
  static constexpr SlotAction listen(Channel c) { return SlotAction(Kind::Listen, c, nullptr); }
  static constexpr SlotAction transmit_ack(Channel c) {
    return SlotAction(Kind::TransmitAck, c, nullptr);
  }
  static constexpr SlotAction transmit_data(Channel c, const PacketSet& payload) {
    return SlotAction(Kind::TransmitData, c, &payload);
  }

  constexpr Kind kind() const { return kind_; }
  constexpr Channel channel() const { return channel_; }
  constexpr const PacketSet* payload() const { return payload_; }
  constexpr bool is_listen() const { return kind_ == Kind::Listen; }
  constexpr bool is_noop() const { return kind_ == Kind::NoOp; }
  constexpr bool is_transmit() const {
    return kind_ == Kind::TransmitData || kind_ == Kind::TransmitAck;
  }

 private:
  constexpr SlotAction(Kind kind, Channel c, const PacketSet* payload)
      : kind_(kind), channel_(c), payload_(payload) {}

  Kind kind_ = Kind::NoOp;
  Channel channel_{};
  const PacketSet* payload_ = nullptr;
};

}  // namespace uie
