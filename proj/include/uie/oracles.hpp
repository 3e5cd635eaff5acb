#pragma once

// Closed-form and Monte-Carlo checks for the probabilistic building blocks of
// the analysis: idle/single-transmission probabilities on one channel, the
// product bound 4^-S <= prod(1 - b_i) <= e^-S, and balls-into-bins
// concentration (weighted and unweighted).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uie/random.hpp"

namespace uie::oracles {

struct IdleSingle {
  double idle = 1.0;    // w0: nobody transmits
  double single = 0.0;  // w1: exactly one transmits
};

inline void require_open_half(std::span<const double> p) {
  for (double x : p)
    if (!(x > 0.0 && x < 0.5))
      throw std::domain_error("transmission probability " + std::to_string(x) +
                              " outside (0, 1/2)");
}

inline IdleSingle exact_idle_and_single_probs(std::span<const double> p) {
  require_open_half(p);
  IdleSingle r;
  for (double x : p) r.idle *= 1.0 - x;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double term = p[i];
    for (std::size_t j = 0; j < p.size(); ++j)
      if (j != i) term *= 1.0 - p[j];
    r.single += term;
  }
  return r;
}

inline constexpr double kIdleSingleTolerance = 1e-9;

// w0 S <= w1 <= 2 w0 S with S the sum of the probabilities.
inline bool verify_q1_q0_bound(std::span<const double> p) {
  const auto [w0, w1] = exact_idle_and_single_probs(p);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  return w0 * s <= w1 + kIdleSingleTolerance && w1 <= 2.0 * w0 * s + kIdleSingleTolerance;
}

inline constexpr double kProductBoundTolerance = 1e-12;

inline bool product_bound_check(std::span<const double> b) {
  double s = 0.0;
  double prod = 1.0;
  for (double x : b) {
    if (!(x >= 0.0 && x <= 0.5))
      throw std::domain_error("value " + std::to_string(x) + " outside [0, 1/2]");
    s += x;
    prod *= 1.0 - x;
  }
  return std::pow(4.0, -s) <= prod + kProductBoundTolerance &&
         prod <= std::exp(-s) + kProductBoundTolerance;
}

struct BinStats {
  std::size_t bins = 0;
  std::vector<double> weight;       // per bin
  std::vector<std::size_t> count;   // balls per bin
  std::size_t good_weight_bins = 0; // total weight in [15/16 alpha, 2 alpha]
  std::size_t bins_with_2plus = 0;
};

// Throws each ball into a uniform bin. `alpha` is the mean load per bin the
// caller intends (sum of weights / bins); the weight band is measured against it.
template <typename R>
BinStats balls_in_bins_trial(std::size_t bins, std::span<const double> weights, double alpha,
                             R& rand) {
  if (bins == 0) throw std::invalid_argument("need at least one bin");
  BinStats s;
  s.bins = bins;
  s.weight.assign(bins, 0.0);
  s.count.assign(bins, 0);
  for (double w : weights) {
    const auto b = static_cast<std::size_t>(rand.index(bins));
    s.weight[b] += w;
    ++s.count[b];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (alpha * 15.0 / 16.0 <= s.weight[b] && s.weight[b] <= 2.0 * alpha) ++s.good_weight_bins;
    if (s.count[b] >= 2) ++s.bins_with_2plus;
  }
  return s;
}

// The two sufficient conditions on zeta used for the weighted bins bound:
//   exp(-0.01 / (16^2 * 2 * zeta)) < 1/128   (lower band edge)
//   exp(-0.01 / (3 * zeta))        < 1/128   (upper band edge)
struct ZetaConditions {
  double lower_edge_value = 0.0;
  double upper_edge_value = 0.0;
  bool lower_edge_holds = false;
  bool upper_edge_holds = false;
};

inline ZetaConditions zeta_conditions(double zeta) {
  ZetaConditions c;
  c.lower_edge_value = std::exp(-0.01 / (16.0 * 16.0 * 2.0 * zeta));
  c.upper_edge_value = std::exp(-0.01 / (3.0 * zeta));
  c.lower_edge_holds = c.lower_edge_value < 1.0 / 128.0;
  c.upper_edge_holds = c.upper_edge_value < 1.0 / 128.0;
  return c;
}

}  // namespace uie::oracles
