#pragma once

#include <concepts>
#include <cstdint>
#include <deque>
#include <stdexcept>

#include "uie/core.hpp"

namespace uie {

// The two kinds of randomness the protocol consumes: a biased coin and a
// uniform channel choice in [1, F].
template <typename R>
concept RandomSource = requires(R& r, double p, std::uint32_t channels) {
  { r.bernoulli(p) } -> std::same_as<bool>;
  { r.pick_channel(channels) } -> std::same_as<Channel>;
};

// Independent per-stream generator: SplitMix64 over a counter keyed by
// (master seed, stream index). Eight bytes of state per stream, so one
// stream per node stays cheap at large n, and evaluation order never changes
// outcomes.
class StreamRandom {
 public:
  StreamRandom(std::uint64_t seed, std::uint64_t stream)
      : state_(mix(mix(seed ^ 0x554945u) + stream * kGamma)) {}

  std::uint64_t next() { return mix(state_ += kGamma); }

  // 53-bit uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  Channel pick_channel(std::uint32_t channels) {
    return Channel{1 + static_cast<std::uint32_t>(index(channels))};
  }

  // Uniform in [0, bound).
  std::uint64_t index(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

static_assert(RandomSource<StreamRandom>);

// Replays a fixed script of coin flips and channel choices. Running past the
// end of either script is a test bug and throws.
class ScriptedRandom {
 public:
  ScriptedRandom() = default;
  ScriptedRandom(std::initializer_list<bool> coins, std::initializer_list<std::uint32_t> channels)
      : coins_(coins), channels_(channels) {}

  ScriptedRandom& coin(bool value) {
    coins_.push_back(value);
    return *this;
  }
  ScriptedRandom& channel(std::uint32_t value) {
    channels_.push_back(value);
    return *this;
  }

  bool bernoulli(double) {
    if (coins_.empty()) throw std::logic_error("scripted random source: coin script exhausted");
    const bool v = coins_.front();
    coins_.pop_front();
    return v;
  }

  Channel pick_channel(std::uint32_t channels) {
    if (channels_.empty())
      throw std::logic_error("scripted random source: channel script exhausted");
    const std::uint32_t v = channels_.front();
    channels_.pop_front();
    if (v < 1 || v > channels) throw std::logic_error("scripted channel out of range");
    return Channel{v};
  }

  bool exhausted() const { return coins_.empty() && channels_.empty(); }

 private:
  std::deque<bool> coins_;
  std::deque<std::uint32_t> channels_;
};

static_assert(RandomSource<ScriptedRandom>);

}  // namespace uie
