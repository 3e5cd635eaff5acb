#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "reference_network.hpp"
#include "uie/engine.hpp"
#include "uie/experiments.hpp"

namespace uie {
namespace {

SimConfig small(std::uint32_t n, std::uint32_t k, std::uint32_t F, std::uint64_t seed = 1) {
  SimConfig c;
  c.nodes = n;
  c.sources = k;
  c.channels = F;
  c.seed = seed;
  return c;
}

TEST(RunRound, SlotThreeDeliveryEndsTheOnlySource) {
  std::vector<ScriptedRandom> streams(2);
  streams[0].channel(1).coin(false).coin(true);  // listen in slot 1, send in slot 3
  Network<ScriptedRandom> net(small(2, 1, 1), std::move(streams));
  const auto tr = net.run_round();
  EXPECT_EQ(tr.active, 1u);
  EXPECT_EQ(tr.d2, 0u);
  EXPECT_EQ(tr.d4, 1u);
  EXPECT_TRUE(tr.s3);
  EXPECT_EQ(tr.s1, 0u);
  EXPECT_EQ(net.active_count(), 0u);
  EXPECT_TRUE(net.packets_of(NodeId{1}).contains(PacketId{0}));
  EXPECT_TRUE(net.complete());
}

TEST(RunRound, CollidingSourcesHalveAndStay) {
  std::vector<ScriptedRandom> streams(3);
  for (int v : {0, 1}) streams[v].channel(1).coin(true).coin(false);
  Network<ScriptedRandom> net(small(3, 2, 1), std::move(streams));
  const auto tr = net.run_round();
  EXPECT_EQ(tr.d2 + tr.d4, 0u);
  EXPECT_EQ(tr.crowded_channels, 1u);
  for (int v : {0, 1}) {
    EXPECT_DOUBLE_EQ(net.nodes()[v].p, kDefaultZeta / 2);
    EXPECT_DOUBLE_EQ(net.nodes()[v].q, kDefaultZeta);
    EXPECT_TRUE(net.nodes()[v].active());
  }
  EXPECT_TRUE(net.packets_of(NodeId{2}).empty());
}

TEST(RunRound, SlotOneDeliveryEndsTheSender) {
  std::vector<ScriptedRandom> streams(2);
  streams[0].channel(1).coin(true).coin(false);
  streams[1].channel(1).coin(false).coin(false);
  Network<ScriptedRandom> net(small(2, 2, 1), std::move(streams));
  const auto tr = net.run_round();
  EXPECT_EQ(tr.s1, 1u);
  EXPECT_EQ(tr.d2, 1u);
  EXPECT_FALSE(net.nodes()[0].active());
  EXPECT_TRUE(net.nodes()[1].active());
  EXPECT_TRUE(net.nodes()[1].packets.is_full());
}

TEST(RunRound, NothingActiveIsQuiet) {
  std::vector<ScriptedRandom> streams(2);
  streams[0].channel(1).coin(false).coin(true);
  Network<ScriptedRandom> net(small(2, 1, 1), std::move(streams));
  net.run_round();
  const auto tr = net.run_round();  // scripts are exhausted: nothing may draw
  EXPECT_EQ(tr.active, 0u);
  EXPECT_EQ(tr.sum_p, 0.0);
  EXPECT_EQ(tr.d2 + tr.d4 + tr.s1, 0u);
  EXPECT_FALSE(tr.s3);
}

TEST(RunSimulation, LoneNodeNeverFinishes) {
  auto c = small(1, 1, 1);
  c.max_rounds = 50;
  const auto r = run_simulation(c);
  EXPECT_EQ(r.status, SimStatus::RoundCapExceeded);
  EXPECT_EQ(r.rounds, 50u);
  EXPECT_FALSE(r.completion_round);
  EXPECT_EQ(r.first_single_active_round, 0u);
}

TEST(RunSimulation, SmallNetworkCompletes) {
  auto c = small(256, 16, 4);
  c.check_invariants = true;
  const auto r = run_simulation(c);
  ASSERT_EQ(r.status, SimStatus::Completed);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_EQ(*r.completion_round, r.rounds);
  EXPECT_LE(*r.first_single_active_round, *r.completion_round);
  EXPECT_LE(*r.first_below_flogn_round, *r.first_single_active_round);
}

TEST(RunSimulation, TwoNodeMedianNearOneOverZeta) {
  std::vector<double> t;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto r = run_simulation(small(2, 1, 1, seed));
    ASSERT_EQ(r.status, SimStatus::Completed);
    t.push_back(static_cast<double>(*r.completion_round));
  }
  const double m = *median(t);
  EXPECT_GE(m, 32.0 / 3);
  EXPECT_LE(m, 32.0 * 3);
}

TEST(RunSimulation, RejectsBadConfig) {
  EXPECT_THROW(run_simulation(small(4, 5, 1)), std::invalid_argument);
  EXPECT_THROW(run_simulation(small(4, 0, 1)), std::invalid_argument);
  EXPECT_THROW(run_simulation(small(4, 1, 0)), std::invalid_argument);
  auto c = small(4, 1, 1);
  c.zeta = 0.5;
  EXPECT_THROW(run_simulation(c), std::invalid_argument);
}

TEST(RoundCap, Formula) {
  auto c = small(1024, 512, 4);
  EXPECT_EQ(c.round_cap(), static_cast<std::uint64_t>(std::ceil(64.0 * (128 + 40))) + 10'000);
  c.max_rounds = 7;
  EXPECT_EQ(c.round_cap(), 7u);
}

TEST(CheckInvariants, CleanStartAndInjectedFaults) {
  Network<> net(small(8, 4, 2));
  EXPECT_TRUE(net.check().empty());

  net.mutable_node(NodeId{3}).p = 0.0;
  auto v = net.check();
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "node 3: p out of range");
  net.mutable_node(NodeId{3}).p = kDefaultZeta;

  net.mutable_node(NodeId{2}).activity = Activity::Inactive;
  v = net.check();
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "active nodes hold 3 of 4 packets");

  std::vector<Activity> before(8, Activity::Inactive);
  v = net.check(before);
  EXPECT_EQ(std::count_if(v.begin(), v.end(),
                          [](const std::string& s) { return s.ends_with("reactivated"); }),
            3);
}

TEST(CheckInvariants, NoActiveNodesNeedNoPackets) {
  std::vector<NodeState> nodes{init_node(false, std::nullopt, kDefaultZeta, 3)};
  EXPECT_TRUE(check_invariants(nodes, 3, kDefaultZeta).empty());
}

// Many random configurations, invariants checked after every round.
TEST(EngineProperties, InvariantsHoldUnderFuzz) {
  StreamRandom rand(2024, 0);
  std::uint64_t rounds = 0;
  for (int trial = 0; trial < 40; ++trial) {
    SimConfig c;
    c.nodes = 2 + static_cast<std::uint32_t>(rand.index(60));
    c.sources = 1 + static_cast<std::uint32_t>(rand.index(c.nodes));
    c.channels = 1 + static_cast<std::uint32_t>(rand.index(8));
    c.seed = rand.next();
    c.check_invariants = true;
    const auto r = run_simulation(c);
    rounds += r.rounds;
    ASSERT_TRUE(r.violations.empty()) << r.violations.front();
    ASSERT_EQ(r.status, SimStatus::Completed);

    std::uint32_t drops = 0;
    for (std::size_t i = 0; i < r.traces.size(); ++i) {
      const auto& tr = r.traces[i];
      drops += tr.d2 + tr.d4;
      const std::uint32_t next = i + 1 < r.traces.size() ? r.traces[i + 1].active : 0;
      ASSERT_LE(next, tr.active);
      ASSERT_EQ(tr.active - next, tr.d2 + tr.d4);
      ASSERT_LE(tr.s1, c.channels);
    }
    EXPECT_EQ(drops, c.sources);
  }
  EXPECT_GT(rounds, 1000u);
}

TEST(EngineProperties, SameSeedSameRun) {
  const auto c = small(200, 50, 4, 77);
  const auto a = run_simulation(c);
  const auto b = run_simulation(c);
  EXPECT_EQ(a.traces, b.traces);
  EXPECT_EQ(a.completion_round, b.completion_round);
  const auto other = run_simulation(small(200, 50, 4, 78));
  EXPECT_NE(a.traces, other.traces);
}

// The optimized engine must agree round by round with the naive one that
// materializes every node's packets and arbitrates all n nodes each slot.
TEST(EngineProperties, MatchesReferenceSimulator) {
  struct Case {
    std::uint32_t n, k, F;
    std::uint64_t seed;
    bool hold;
  };
  for (const Case& cs : {Case{2, 1, 1, 1, false}, Case{5, 5, 1, 2, false},
                         Case{40, 10, 3, 3, false}, Case{64, 64, 4, 4, false},
                         Case{33, 7, 8, 5, false}, Case{30, 30, 2, 6, true}}) {
    auto c = small(cs.n, cs.k, cs.F, cs.seed);
    c.hold_active = cs.hold;
    Network<> fast(c);
    testing::ReferenceNetwork slow(c);
    for (int round = 0; round < 3000 && !fast.complete(); ++round) {
      const auto a = fast.run_round();
      const auto b = slow.run_round();
      ASSERT_EQ(a.active, b.active) << "round " << round;
      ASSERT_DOUBLE_EQ(a.sum_p, b.sum_p);
      ASSERT_DOUBLE_EQ(a.sum_q, b.sum_q);
      ASSERT_EQ(a, b) << "n=" << cs.n << " round " << round;
      for (std::uint32_t v = 0; v < cs.n; ++v) {
        const auto& ref = slow.nodes()[v];
        ASSERT_EQ(fast.nodes()[v].activity, ref.activity);
        ASSERT_EQ(fast.nodes()[v].p, ref.p);
        ASSERT_EQ(fast.nodes()[v].q, ref.q);
        ASSERT_EQ(fast.packets_of(NodeId{v}), ref.packets) << "node " << v;
      }
    }
    if (!cs.hold) {
      EXPECT_TRUE(fast.complete());
    }
  }
}

TEST(EngineProperties, HoldActiveFreezesTheActiveSet) {
  auto c = small(64, 64, 4, 9);
  c.hold_active = true;
  c.max_rounds = 200;
  c.check_invariants = true;
  const auto r = run_simulation(c);
  EXPECT_EQ(r.status, SimStatus::RoundCapExceeded);
  EXPECT_TRUE(r.violations.empty());
  for (const auto& tr : r.traces) {
    EXPECT_EQ(tr.active, 64u);
    EXPECT_EQ(tr.d2 + tr.d4, 0u);
  }
}

}  // namespace
}  // namespace uie
