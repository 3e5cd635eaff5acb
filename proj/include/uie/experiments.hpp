#pragma once

// Experiment harness: parameter sweeps, the scaling fit against
// k/F + F log2 n, trace statistics for the safe range of the total
// transmission probability, and stabilization runs with a frozen active set.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include "uie/engine.hpp"
#include "uie/trace_io.hpp"

namespace uie {

inline constexpr double kDefaultAlpha1 = 0.01;
inline constexpr double kDefaultAlpha2 = 8.0;

// Median of a sample; the mean of the middle pair for even sizes.
inline std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return (lower + upper) / 2.0;
}

inline double scaling_predictor(double n, double k, double channels) {
  return k / channels + channels * std::log2(n);
}

// ---------------------------------------------------------------------------
// Sweep specification

// Number of sources in a sweep cell: an absolute count, a fraction of n, or
// F * ceil(log2 n).
struct SourceCount {
  struct Absolute { std::uint32_t k; };
  struct FractionOfNodes { double fraction; };
  struct ChannelsLogNodes {};
  std::variant<Absolute, FractionOfNodes, ChannelsLogNodes> rule;

  std::uint64_t resolve(std::uint32_t n, std::uint32_t channels) const {
    return std::visit(
        [&](const auto& r) -> std::uint64_t {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Absolute>) return r.k;
          else if constexpr (std::is_same_v<T, FractionOfNodes>)
            return static_cast<std::uint64_t>(std::llround(r.fraction * n));
          else
            return static_cast<std::uint64_t>(channels) *
                   static_cast<std::uint64_t>(std::ceil(std::log2(static_cast<double>(n))));
        },
        rule);
  }

  // Accepts "64", "n", "n/4", "0.25n" and "Flogn".
  static SourceCount parse(std::string token) {
    std::erase_if(token, [](unsigned char c) { return std::isspace(c); });
    if (token.empty()) throw std::invalid_argument("empty sources entry");
    if (token == "Flogn") return {ChannelsLogNodes{}};
    if (token == "n") return {FractionOfNodes{1.0}};
    if (token.rfind("n/", 0) == 0) {
      const double d = std::stod(token.substr(2));
      if (!(d > 0)) throw std::invalid_argument("bad sources entry '" + token + "'");
      return {FractionOfNodes{1.0 / d}};
    }
    if (token.back() == 'n') return {FractionOfNodes{std::stod(token.substr(0, token.size() - 1))}};
    std::size_t used = 0;
    const unsigned long v = std::stoul(token, &used);
    if (used != token.size()) throw std::invalid_argument("bad sources entry '" + token + "'");
    return {Absolute{static_cast<std::uint32_t>(v)}};
  }
};

struct SweepCell {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::uint32_t channels = 0;
  friend auto operator<=>(const SweepCell&, const SweepCell&) = default;
};

inline std::string describe(const SweepCell& c) {
  return "(n=" + std::to_string(c.n) + ", k=" + std::to_string(c.k) +
         ", F=" + std::to_string(c.channels) + ")";
}

struct SweepSpec {
  std::vector<std::uint32_t> nodes;
  std::vector<SourceCount> sources;
  std::vector<std::uint32_t> channels;
  std::uint32_t seeds_per_cell = 0;
  std::uint64_t seed_base = 1;
  double zeta = kDefaultZeta;
  std::optional<std::uint64_t> max_rounds;
  std::string output;

  // Distinct cells in (n, k, F) order. Throws naming the first invalid cell.
  std::vector<SweepCell> cells() const {
    std::vector<SweepCell> out;
    for (auto n : nodes)
      for (const auto& s : sources)
        for (auto f : channels) {
          const std::uint64_t k = s.resolve(n, f);
          SweepCell cell{n, static_cast<std::uint32_t>(std::min<std::uint64_t>(k, UINT32_MAX)), f};
          if (k < 1 || k > n || f < 1 || n < 1)
            throw std::invalid_argument("invalid sweep cell " + describe(cell) +
                                        ": need 1 <= k <= n and F >= 1");
          out.push_back(cell);
        }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> s(seeds_per_cell);
    for (std::uint32_t i = 0; i < seeds_per_cell; ++i) s[i] = seed_base + i;
    return s;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_floating_point_v<T>) v = static_cast<T>(std::stod(s, &used));
    else v = static_cast<T>(std::stoull(s, &used));
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value '" + s + "' for key '" + key + "'");
  }
}

}  // namespace detail

// Line-oriented key=value file; '#' starts a comment; list values are
// comma-separated:
//   nodes = 1024, 4096
//   sources = Flogn, n/4, n
//   channels = 4, 8, 16, 32
//   seeds = 20
//   seed_base = 1
//   zeta = 0.03125
//   max_rounds = 100000
//   output = sweep.csv
inline SweepSpec parse_sweep_spec(std::istream& in) {
  SweepSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto list = [&] {
      std::vector<std::string> items;
      for (auto& item : detail::split(value, ','))
        if (!item.empty()) items.push_back(item);
      return items;
    };
    if (key == "nodes") {
      for (auto& v : list()) spec.nodes.push_back(detail::parse_number<std::uint32_t>(v, key));
    } else if (key == "sources") {
      for (auto& v : list()) spec.sources.push_back(SourceCount::parse(v));
    } else if (key == "channels") {
      for (auto& v : list()) spec.channels.push_back(detail::parse_number<std::uint32_t>(v, key));
    } else if (key == "seeds") {
      spec.seeds_per_cell = value.empty() ? 0 : detail::parse_number<std::uint32_t>(value, key);
    } else if (key == "seed_base") {
      spec.seed_base = detail::parse_number<std::uint64_t>(value, key);
    } else if (key == "zeta") {
      spec.zeta = detail::parse_number<double>(value, key);
    } else if (key == "max_rounds") {
      spec.max_rounds = detail::parse_number<std::uint64_t>(value, key);
    } else if (key == "output") {
      spec.output = value;
    } else {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return spec;
}

// n in {2^10, 2^12, 2^14}, F in {4, 8, 16, 32}, k in {F ceil(log2 n), n/4, n}.
inline SweepSpec default_grid(std::uint32_t seeds_per_cell = 20) {
  SweepSpec spec;
  spec.nodes = {1u << 10, 1u << 12, 1u << 14};
  spec.channels = {4, 8, 16, 32};
  spec.sources = {{SourceCount::ChannelsLogNodes{}}, {SourceCount::FractionOfNodes{0.25}},
                  {SourceCount::FractionOfNodes{1.0}}};
  spec.seeds_per_cell = seeds_per_cell;
  return spec;
}

// ---------------------------------------------------------------------------
// Sweep execution and CSV

struct SweepRow {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::uint32_t channels = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> completion_round;
  std::optional<std::uint64_t> first_single_active_round;
  std::optional<std::uint64_t> first_below_flogn_round;
  SimStatus status = SimStatus::RoundCapExceeded;

  SweepCell cell() const { return {n, k, channels}; }
  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

inline SimConfig cell_config(const SweepCell& cell, std::uint64_t seed, double zeta,
                             std::optional<std::uint64_t> max_rounds) {
  SimConfig c;
  c.nodes = cell.n;
  c.sources = cell.k;
  c.channels = cell.channels;
  c.zeta = zeta;
  c.seed = seed;
  c.max_rounds = max_rounds;
  c.trace_mode = TraceMode::SummaryOnly;
  return c;
}

inline SweepRow make_row(const SweepCell& cell, std::uint64_t seed, const SimResult& r) {
  return {cell.n,
          cell.k,
          cell.channels,
          seed,
          r.completion_round,
          r.first_single_active_round,
          r.first_below_flogn_round,
          r.status};
}

// Runs every (cell, seed) job on a pool of `workers` threads (0 = one per
// hardware thread). Rows come back sorted by (n, k, F, seed).
inline std::vector<SweepRow> sweep(const SweepSpec& spec, unsigned workers = 0) {
  const auto cells = spec.cells();
  const auto seeds = spec.seeds();
  struct Job {
    SweepCell cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& c : cells)
    for (auto s : seeds) jobs.push_back({c, s});
  std::vector<SweepRow> rows(jobs.size());
  if (jobs.empty()) return rows;

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      const auto& j = jobs[i];
      rows[i] = make_row(j.cell, j.seed,
                         run_simulation(cell_config(j.cell, j.seed, spec.zeta, spec.max_rounds)));
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.n, a.k, a.channels, a.seed) < std::tie(b.n, b.k, b.channels, b.seed);
  });
  return rows;
}

inline constexpr std::string_view kSweepCsvHeader =
    "n,k,F,seed,completion_round,first_single_active_round,first_below_Flogn_round,status";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  auto opt = [](const std::optional<std::uint64_t>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.n << ',' << r.k << ',' << r.channels << ',' << r.seed << ',' << opt(r.completion_round)
        << ',' << opt(r.first_single_active_round) << ',' << opt(r.first_below_flogn_round) << ','
        << to_string(r.status) << '\n';
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kSweepCsvHeader)
    throw std::invalid_argument("sweep CSV: missing or unexpected header");
  std::vector<SweepRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(detail::trim(line), ',');
    if (f.size() != 8)
      throw std::invalid_argument("sweep CSV line " + std::to_string(lineno) + ": expected 8 fields");
    auto opt = [&](const std::string& s, const char* name) -> std::optional<std::uint64_t> {
      if (s.empty()) return std::nullopt;
      return detail::parse_number<std::uint64_t>(s, name);
    };
    SweepRow r;
    r.n = detail::parse_number<std::uint32_t>(f[0], "n");
    r.k = detail::parse_number<std::uint32_t>(f[1], "k");
    r.channels = detail::parse_number<std::uint32_t>(f[2], "F");
    r.seed = detail::parse_number<std::uint64_t>(f[3], "seed");
    r.completion_round = opt(f[4], "completion_round");
    r.first_single_active_round = opt(f[5], "first_single_active_round");
    r.first_below_flogn_round = opt(f[6], "first_below_Flogn_round");
    const auto status = parse_status(f[7]);
    if (!status)
      throw std::invalid_argument("sweep CSV line " + std::to_string(lineno) + ": bad status");
    r.status = *status;
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Scaling fit

struct CellFit {
  SweepCell cell;
  double median_t_star = 0.0;
  double predictor = 0.0;  // k/F + F log2 n
  // Fold by which the fitted bound overshoots the observation:
  // (C * predictor - median) / median. Zero for the cell that sets C.
  double residual = 0.0;
};

struct ScalingFit {
  double constant = 0.0;  // C in T* <= C (k/F + F log2 n)
  std::vector<CellFit> cells;
  double max_relative_residual = 0.0;
};

// C is the largest per-cell ratio median(T*) / (k/F + F log2 n), where T* is
// the first round with at most one active node.
inline ScalingFit fit_scaling(const std::vector<SweepRow>& rows) {
  std::map<SweepCell, std::vector<double>> by_cell;
  std::vector<std::string> failed;
  for (const auto& r : rows) {
    if (r.status != SimStatus::Completed || !r.first_single_active_round) {
      failed.push_back(describe(r.cell()) + " seed " + std::to_string(r.seed));
      continue;
    }
    by_cell[r.cell()].push_back(static_cast<double>(*r.first_single_active_round));
  }
  if (!failed.empty()) {
    std::string msg = "cannot fit: runs hit the round cap:";
    for (const auto& f : failed) msg += " " + f;
    throw std::invalid_argument(msg);
  }
  if (by_cell.empty()) throw std::invalid_argument("cannot fit: no rows");

  ScalingFit fit;
  for (const auto& [cell, values] : by_cell) {
    CellFit c;
    c.cell = cell;
    c.median_t_star = *median(values);
    c.predictor = scaling_predictor(cell.n, cell.k, cell.channels);
    fit.constant = std::max(fit.constant, c.median_t_star / c.predictor);
    fit.cells.push_back(c);
  }
  for (auto& c : fit.cells) {
    c.residual = c.median_t_star > 0
                     ? (fit.constant * c.predictor - c.median_t_star) / c.median_t_star
                     : (fit.constant > 0 ? INFINITY : 0.0);
    fit.max_relative_residual = std::max(fit.max_relative_residual, c.residual);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Trace statistics

struct SafeRange {
  double alpha1 = kDefaultAlpha1;
  double alpha2 = kDefaultAlpha2;

  bool contains(double sum_p, double channels) const {
    return alpha1 * channels <= sum_p && sum_p <= alpha2 * channels;
  }
};

// Fraction of rounds with active_count >= F log2 n (after the first
// `skip_rounds`) whose total p lies in the safe range. Absent if no round
// qualifies.
inline std::optional<double> safe_range_occupancy(const std::vector<RoundTrace>& traces,
                                                  SafeRange range, std::uint32_t channels,
                                                  std::uint32_t n, std::uint64_t skip_rounds = 0) {
  const double threshold = channels * log2_nodes(n);
  std::size_t qualifying = 0;
  std::size_t inside = 0;
  for (const auto& tr : traces) {
    if (tr.t < skip_rounds || tr.active < threshold) continue;
    ++qualifying;
    if (range.contains(tr.sum_p, channels)) ++inside;
  }
  if (qualifying == 0) return std::nullopt;
  return static_cast<double>(inside) / static_cast<double>(qualifying);
}

struct DeactivationRate {
  double mean = 0.0;                 // slot-2 deactivations per qualifying round
  double fraction_at_least = 0.0;    // rounds with d2 >= c2 F
  std::size_t qualifying_rounds = 0;
};

// Slot-2 deactivations over rounds that are in the safe range and have at
// least F log2 n active nodes.
inline std::optional<DeactivationRate> lemma5_deactivation_rate(
    const std::vector<std::vector<RoundTrace>>& runs, SafeRange range, std::uint32_t channels,
    std::uint32_t n, double c2) {
  const double threshold = channels * log2_nodes(n);
  DeactivationRate rate;
  double total = 0.0;
  std::size_t hits = 0;
  for (const auto& traces : runs)
    for (const auto& tr : traces) {
      if (tr.active < threshold || !range.contains(tr.sum_p, channels)) continue;
      ++rate.qualifying_rounds;
      total += tr.d2;
      if (tr.d2 >= c2 * channels) ++hits;
    }
  if (rate.qualifying_rounds == 0) return std::nullopt;
  rate.mean = total / static_cast<double>(rate.qualifying_rounds);
  rate.fraction_at_least = static_cast<double>(hits) / static_cast<double>(rate.qualifying_rounds);
  return rate;
}

// ---------------------------------------------------------------------------
// Stabilization

struct StabilizationSpec {
  std::uint32_t nodes = 1024;      // all nodes are sources
  std::uint32_t channels = 16;
  double p_star = 0.0;             // initial total p, spread evenly
  double zeta = kDefaultZeta;
  SafeRange range;
  std::uint64_t max_rounds = 10'000;
  bool hold_active = true;
};

struct StabilizationStats {
  std::vector<std::optional<std::uint64_t>> recovery;  // per seed; absent = censored
  std::optional<double> median_recovery;               // censored runs count as +inf
  std::size_t censored = 0;
  double predictor = 0.0;  // log2(max(p*/F, F/p*)) + log2 n
};

inline double stabilization_predictor(double p_star, double channels, double n) {
  return std::log2(std::max(p_star / channels, channels / p_star)) + std::log2(n);
}

// First round boundary at which the total p over active nodes is inside the
// safe range, or nullopt if that never happens within the cap.
inline std::optional<std::uint64_t> recovery_round(const StabilizationSpec& spec,
                                                   std::uint64_t seed) {
  SimConfig c;
  c.nodes = spec.nodes;
  c.sources = spec.nodes;
  c.channels = spec.channels;
  c.zeta = spec.zeta;
  c.seed = seed;
  c.hold_active = spec.hold_active;
  c.trace_mode = TraceMode::SummaryOnly;
  c.initial_p_override = std::min(spec.zeta, spec.p_star / spec.nodes);
  Network<StreamRandom> net(c);
  auto total_p = [&] {
    double sum = 0.0;
    for (const auto& s : net.nodes())
      if (s.active()) sum += s.p;
    return sum;
  };
  for (std::uint64_t t = 0; t <= spec.max_rounds; ++t) {
    if (net.active_count() > 0 && spec.range.contains(total_p(), spec.channels)) return t;
    if (t == spec.max_rounds) break;
    net.run_round();
  }
  return std::nullopt;
}

inline StabilizationStats stabilization_experiment(const StabilizationSpec& spec,
                                                   const std::vector<std::uint64_t>& seeds) {
  if (!(spec.p_star > 0)) throw std::invalid_argument("p* must be positive");
  StabilizationStats stats;
  stats.predictor = stabilization_predictor(spec.p_star, spec.channels, spec.nodes);
  std::vector<double> values;
  for (auto seed : seeds) {
    const auto r = recovery_round(spec, seed);
    stats.recovery.push_back(r);
    if (r) values.push_back(static_cast<double>(*r));
    else {
      ++stats.censored;
      values.push_back(INFINITY);
    }
  }
  if (const auto m = median(values); m && std::isfinite(*m)) stats.median_recovery = m;
  return stats;
}

}  // namespace uie
