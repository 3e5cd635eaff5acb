#pragma once

// Single-hop multi-channel collision model. In each slot every node either
// transmits, listens or idles on one channel. A listener hears a message iff
// exactly one node transmits on its channel, silence iff none does, and a
// collision otherwise. Transmitters learn nothing in the slot they transmit.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "uie/core.hpp"

namespace uie {

struct ArbitrationEntry {
  NodeId node;
  SlotAction action;
};

// A block of anonymous nodes that all take the same action on one channel.
// Their individual observations are not materialized; each of them perceives
// SlotResolution::on_channel(channel).
struct UniformGroup {
  Channel channel;
  SlotAction::Kind kind = SlotAction::Kind::Listen;  // Listen or TransmitAck
  std::size_t count = 0;
};

struct SlotResolution {
  // Aligned with the submitted entries; engaged for listeners only.
  std::vector<std::optional<ChannelObservation>> observations;
  // Indexed by channel number; index 0 is unused.
  std::vector<std::uint32_t> transmitter_count;
  std::vector<std::uint32_t> listener_count;
  std::vector<std::pair<NodeId, Channel>> successful;

  ChannelObservation on_channel(Channel c) const { return channel_view.at(c.value); }

  std::vector<ChannelObservation> channel_view;
};

namespace detail {

[[noreturn, gnu::cold]] inline void channel_out_of_range(Channel c, std::uint32_t channels) {
  throw std::out_of_range("channel " + std::to_string(c.value) + " outside [1, " +
                          std::to_string(channels) + "]");
}

inline void check_channel(Channel c, std::uint32_t channels) {
  if (c.value < 1 || c.value > channels) [[unlikely]]
    channel_out_of_range(c, channels);
}

}  // namespace detail

inline SlotResolution arbitrate(std::span<const ArbitrationEntry> entries, std::uint32_t channels,
                                std::span<const UniformGroup> groups = {}) {
  SlotResolution r;
  r.transmitter_count.assign(channels + 1, 0);
  r.listener_count.assign(channels + 1, 0);
  r.channel_view.assign(channels + 1, ChannelObservation::idle());

  // The sole transmission on a channel, if any: entry index, or a group.
  std::vector<const SlotAction*> sole(channels + 1, nullptr);
  std::vector<std::size_t> sole_entry(channels + 1, entries.size());

  for (std::size_t i = 0; i < entries.size(); ++i) {
    const SlotAction& a = entries[i].action;
    if (a.is_noop()) continue;
    detail::check_channel(a.channel(), channels);
    const auto c = a.channel().value;
    if (a.is_transmit()) {
      if (++r.transmitter_count[c] == 1) {
        sole[c] = &a;
        sole_entry[c] = i;
      }
    } else {
      ++r.listener_count[c];
    }
  }
  static constexpr SlotAction kGroupAck = SlotAction::transmit_ack(Channel{1});
  for (const UniformGroup& g : groups) {
    if (g.count == 0) continue;
    detail::check_channel(g.channel, channels);
    const auto c = g.channel.value;
    const auto count = static_cast<std::uint32_t>(g.count);
    switch (g.kind) {
      case SlotAction::Kind::Listen:
        r.listener_count[c] += count;
        break;
      case SlotAction::Kind::TransmitAck:
        if (r.transmitter_count[c] == 0 && count == 1) sole[c] = &kGroupAck;
        r.transmitter_count[c] += count;
        sole_entry[c] = entries.size();
        break;
      default:
        throw std::invalid_argument("uniform groups may only listen or acknowledge");
    }
  }

  for (std::uint32_t c = 1; c <= channels; ++c) {
    const auto tx = r.transmitter_count[c];
    if (tx == 0) continue;
    if (tx >= 2) {
      r.channel_view[c] = ChannelObservation::collision();
      continue;
    }
    const SlotAction& a = *sole[c];
    r.channel_view[c] = a.kind() == SlotAction::Kind::TransmitData
                            ? ChannelObservation::data(*a.payload())
                            : ChannelObservation::ack();
    if (r.listener_count[c] > 0 && sole_entry[c] < entries.size())
      r.successful.emplace_back(entries[sole_entry[c]].node, Channel{c});
  }

  r.observations.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const SlotAction& a = entries[i].action;
    if (a.is_listen()) r.observations[i] = r.channel_view[a.channel().value];
  }
  return r;
}

}  // namespace uie
