#include <optional>

#include <gtest/gtest.h>

#include "uie/node.hpp"
#include "uie/random.hpp"

namespace uie {
namespace {

constexpr double kZeta = 1.0 / 32;
constexpr std::size_t kUniverse = 8;

NodeState active_with(double p, double q = kZeta) {
  NodeState s = init_node(true, PacketId{1}, kZeta, kUniverse);
  s.p = p;
  s.q = q;
  return s;
}

PacketSet set_of(std::initializer_list<std::uint32_t> ids) {
  PacketSet s(kUniverse);
  for (auto id : ids) s.insert(PacketId{id});
  return s;
}

TEST(InitNode, SourceAndNonSource) {
  const auto src = init_node(true, PacketId{3}, kZeta, kUniverse);
  EXPECT_EQ(src.activity, Activity::Active);
  EXPECT_EQ(src.p, kZeta);
  EXPECT_EQ(src.q, kZeta);
  EXPECT_EQ(src.packets, set_of({3}));

  const auto other = init_node(false, std::nullopt, kZeta, kUniverse);
  EXPECT_EQ(other.activity, Activity::Inactive);
  EXPECT_EQ(other.p, kZeta);
  EXPECT_TRUE(other.packets.empty());

  const auto sixteenth = init_node(true, PacketId{0}, 1.0 / 16, kUniverse);
  EXPECT_EQ(sixteenth.p, 1.0 / 16);
  EXPECT_EQ(sixteenth.q, 1.0 / 16);
  EXPECT_EQ(sixteenth.packets, set_of({0}));
}

TEST(InitNode, RejectsInconsistentPacket) {
  EXPECT_THROW(init_node(false, PacketId{1}, kZeta, kUniverse), std::invalid_argument);
  EXPECT_THROW(init_node(true, std::nullopt, kZeta, kUniverse), std::invalid_argument);
}

TEST(UpdateProbability, Rules) {
  EXPECT_DOUBLE_EQ(update_probability(0.01, ProbUpdateEvent::ObservedIdle, kZeta), 0.02);
  EXPECT_DOUBLE_EQ(update_probability(0.03, ProbUpdateEvent::ObservedIdle, 0.03125), 0.03125);
  EXPECT_DOUBLE_EQ(update_probability(0.02, ProbUpdateEvent::ObservedBusy, kZeta), 0.01);
  EXPECT_DOUBLE_EQ(update_probability(0.02, ProbUpdateEvent::TransmittedSelf, kZeta), 0.01);
  EXPECT_DOUBLE_EQ(update_probability(0.02, ProbUpdateEvent::ReceivedMessage, kZeta), 0.01);
}

TEST(Slot1, Decide) {
  ScriptedRandom none;
  auto inactive = init_node(false, std::nullopt, kZeta, kUniverse);
  EXPECT_TRUE(decide_slot1(inactive, none, 4).is_noop());

  auto s = active_with(kZeta);
  ScriptedRandom tx({true}, {3});
  const auto a = decide_slot1(s, tx, 4);
  EXPECT_EQ(a.kind(), SlotAction::Kind::TransmitData);
  EXPECT_EQ(a.channel(), Channel{3});
  EXPECT_EQ(a.payload(), &s.packets);
  EXPECT_EQ(s.memory.selected, Channel{3});

  ScriptedRandom rx({false}, {1});
  const auto b = decide_slot1(s, rx, 4);
  EXPECT_TRUE(b.is_listen());
  EXPECT_EQ(b.channel(), Channel{1});
}

TEST(Slot1, Update) {
  auto idle = active_with(0.02);
  update_after_slot1(idle, SlotAction::listen(Channel{2}), ChannelObservation::idle(), kZeta);
  EXPECT_DOUBLE_EQ(idle.p, kZeta);  // 0.04 capped at 1/32

  // Under a larger cap the doubling is visible.
  auto idle2 = active_with(0.02);
  update_after_slot1(idle2, SlotAction::listen(Channel{2}), ChannelObservation::idle(), 0.25);
  EXPECT_DOUBLE_EQ(idle2.p, 0.04);
  EXPECT_EQ(idle2.packets, set_of({1}));

  auto rx = active_with(0.02);
  const auto m = set_of({2});
  update_after_slot1(rx, SlotAction::listen(Channel{2}), ChannelObservation::data(m), kZeta);
  EXPECT_DOUBLE_EQ(rx.p, 0.01);
  EXPECT_EQ(rx.packets, set_of({1, 2}));
  EXPECT_TRUE(rx.memory.received_slot1);

  auto busy = active_with(0.02);
  update_after_slot1(busy, SlotAction::listen(Channel{2}), ChannelObservation::collision(), kZeta);
  EXPECT_DOUBLE_EQ(busy.p, 0.01);
  EXPECT_FALSE(busy.memory.received_slot1);

  auto tx = active_with(0.02);
  update_after_slot1(tx, SlotAction::transmit_data(Channel{2}, tx.packets), std::nullopt, kZeta);
  EXPECT_DOUBLE_EQ(tx.p, 0.01);
  EXPECT_TRUE(tx.memory.transmitted_slot1);
}

TEST(Slot2, Decide) {
  auto s = active_with(kZeta);
  s.memory.selected = Channel{5};
  s.memory.received_slot1 = true;
  EXPECT_EQ(decide_slot2(s).kind(), SlotAction::Kind::TransmitAck);
  EXPECT_EQ(decide_slot2(s).channel(), Channel{5});

  s.memory = {Channel{5}, true, false, false, false};
  EXPECT_TRUE(decide_slot2(s).is_listen());
  EXPECT_EQ(decide_slot2(s).channel(), Channel{5});

  s.memory = {Channel{5}, false, false, false, false};
  EXPECT_TRUE(decide_slot2(s).is_noop());
}

TEST(Slot2, Update) {
  auto base = active_with(0.02);
  base.memory.transmitted_slot1 = true;

  auto acked = base;
  EXPECT_TRUE(update_after_slot2(acked, ChannelObservation::ack()));
  EXPECT_EQ(acked.activity, Activity::Inactive);

  auto busy = base;
  EXPECT_TRUE(update_after_slot2(busy, ChannelObservation::collision()));
  EXPECT_EQ(busy.activity, Activity::Inactive);

  auto quiet = base;
  EXPECT_FALSE(update_after_slot2(quiet, ChannelObservation::idle()));
  EXPECT_EQ(quiet.activity, Activity::Active);
  EXPECT_DOUBLE_EQ(quiet.p, 0.02);
}

TEST(Slot3, Decide) {
  ScriptedRandom none;
  const auto inactive = init_node(false, std::nullopt, kZeta, kUniverse);
  EXPECT_EQ(decide_slot3(inactive, none).kind(), SlotAction::Kind::Listen);
  EXPECT_EQ(decide_slot3(inactive, none).channel(), kPrimaryChannel);

  const auto s = active_with(kZeta);
  ScriptedRandom tx({true}, {});
  const auto a = decide_slot3(s, tx);
  EXPECT_EQ(a.kind(), SlotAction::Kind::TransmitData);
  EXPECT_EQ(a.channel(), kPrimaryChannel);
  ScriptedRandom rx({false}, {});
  EXPECT_TRUE(decide_slot3(s, rx).is_listen());
}

TEST(Slot3, Update) {
  auto idle = active_with(kZeta, 0.01);
  update_after_slot3(idle, SlotAction::listen(kPrimaryChannel), ChannelObservation::idle(), kZeta);
  EXPECT_DOUBLE_EQ(idle.q, 0.02);
  EXPECT_DOUBLE_EQ(idle.p, kZeta);

  auto inactive = init_node(false, std::nullopt, kZeta, kUniverse);
  const auto all = PacketSet::full(kUniverse);
  update_after_slot3(inactive, SlotAction::listen(kPrimaryChannel), ChannelObservation::data(all),
                     kZeta);
  EXPECT_EQ(inactive.packets, all);
  EXPECT_TRUE(inactive.memory.received_slot3);
  EXPECT_DOUBLE_EQ(inactive.q, kZeta);

  auto tx = active_with(kZeta, 0.02);
  update_after_slot3(tx, SlotAction::transmit_data(kPrimaryChannel, tx.packets), std::nullopt,
                     kZeta);
  EXPECT_DOUBLE_EQ(tx.q, 0.01);
  EXPECT_TRUE(tx.memory.transmitted_slot3);
}

TEST(Slot4, Decide) {
  auto inactive = init_node(false, std::nullopt, kZeta, kUniverse);
  inactive.memory.received_slot3 = true;
  EXPECT_EQ(decide_slot4(inactive).kind(), SlotAction::Kind::TransmitAck);
  EXPECT_EQ(decide_slot4(inactive).channel(), kPrimaryChannel);

  auto tx = active_with(kZeta);
  tx.memory.transmitted_slot3 = true;
  EXPECT_TRUE(decide_slot4(tx).is_listen());

  inactive.memory.received_slot3 = false;
  EXPECT_TRUE(decide_slot4(inactive).is_noop());
}

TEST(Slot4, Update) {
  auto base = active_with(kZeta);
  base.memory.transmitted_slot3 = true;
  base.memory.received_slot1 = true;

  auto many = base;
  EXPECT_TRUE(update_after_slot4(many, ChannelObservation::collision()));
  EXPECT_EQ(many.activity, Activity::Inactive);
  EXPECT_EQ(many.memory, SlotMemory{});

  auto nobody = base;
  EXPECT_FALSE(update_after_slot4(nobody, ChannelObservation::idle()));
  EXPECT_EQ(nobody.activity, Activity::Active);
  EXPECT_EQ(nobody.memory, SlotMemory{});

  auto single = base;
  EXPECT_TRUE(update_after_slot4(single, ChannelObservation::ack()));
  EXPECT_EQ(single.activity, Activity::Inactive);
}

// Random observation sequences: activity is monotone, packets only grow, p
// moves only in slot 1 and q only in slot 3, each by a factor 2 or 1/2.
TEST(NodeProperties, RandomObservationSequences) {
  StreamRandom rand(99, 0);
  const auto other = set_of({5, 6});
  auto random_obs = [&] {
    switch (rand.index(4)) {
      case 0: return ChannelObservation::idle();
      case 1: return ChannelObservation::collision();
      case 2: return ChannelObservation::ack();
      default: return ChannelObservation::data(other);
    }
  };
  for (int trial = 0; trial < 200; ++trial) {
    NodeState s = init_node(true, PacketId{1}, kZeta, kUniverse);
    bool was_inactive = false;
    for (int round = 0; round < 50; ++round) {
      const PacketSet before = s.packets;
      const double p0 = s.p, q0 = s.q;

      const auto a1 = decide_slot1(s, rand, 4);
      std::optional<ChannelObservation> o1;
      if (a1.is_listen()) o1 = random_obs();
      update_after_slot1(s, a1, o1, kZeta);
      ASSERT_EQ(s.q, q0);
      if (s.active()) ASSERT_TRUE(s.p == p0 / 2 || s.p == std::min(2 * p0, kZeta));
      else ASSERT_EQ(s.p, p0);

      const double p1 = s.p;
      const auto a2 = decide_slot2(s);
      std::optional<ChannelObservation> o2;
      if (a2.is_listen()) o2 = random_obs();
      update_after_slot2(s, o2);
      ASSERT_EQ(s.p, p1);

      const auto a3 = decide_slot3(s, rand);
      std::optional<ChannelObservation> o3;
      if (a3.is_listen()) o3 = random_obs();
      const bool active_in_3 = s.active();
      update_after_slot3(s, a3, o3, kZeta);
      ASSERT_EQ(s.p, p1);
      if (active_in_3) ASSERT_TRUE(s.q == q0 / 2 || s.q == std::min(2 * q0, kZeta));
      else ASSERT_EQ(s.q, q0);

      const auto a4 = decide_slot4(s);
      std::optional<ChannelObservation> o4;
      if (a4.is_listen()) o4 = random_obs();
      update_after_slot4(s, o4);

      ASSERT_TRUE(before.is_subset_of(s.packets));
      if (was_inactive) {
        ASSERT_FALSE(s.active());
      }
      was_inactive = !s.active();
      if (was_inactive) {
        // Inactive nodes never contend.
        ASSERT_TRUE(decide_slot1(s, rand, 4).is_noop());
      }
    }
  }
}

}  // namespace
}  // namespace uie
