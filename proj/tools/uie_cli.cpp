// Command-line harness for the UIE simulator.
//
//   uie run        single simulation, JSON-lines trace and JSON summary
//   uie sweep      parameter sweep from a key=value spec file, CSV out
//   uie fit        fit T* <= C (k/F + F log2 n) to a sweep CSV
//   uie stabilize  recovery of the total p into the safe range
//   uie analyze    safe-range occupancy and slot-2 deactivation rate of a trace
//   uie oracle     closed-form / Monte-Carlo checks (q1q0, product-bound, bins, zeta)

#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uie/uie.hpp"

namespace {

using nlohmann::ordered_json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

struct RunArgs {
  uie::SimConfig config;
  std::uint64_t max_rounds = 0;
  std::string trace_out;
  std::string summary_out;
};

int do_run(const RunArgs& a) {
  uie::SimConfig c = a.config;
  if (a.max_rounds > 0) c.max_rounds = a.max_rounds;
  c.trace_mode = uie::TraceMode::SummaryOnly;
  std::ofstream trace;
  uie::TraceSink sink;
  if (!a.trace_out.empty()) {
    trace = open_out(a.trace_out);
    sink = [&trace](const uie::RoundTrace& tr) { uie::write_trace_line(trace, tr); };
  }
  const uie::SimResult r = uie::run_simulation(c, sink);
  const std::string summary = uie::summary_json(c, r).dump();
  if (a.summary_out.empty()) {
    std::cout << summary << '\n';
  } else {
    open_out(a.summary_out) << summary << '\n';
  }
  for (const auto& v : r.violations) std::cerr << "invariant violation: " << v << '\n';
  return r.violations.empty() ? 0 : 3;
}

int do_sweep(const std::string& spec_path, std::string out_path, unsigned workers) {
  auto in = open_in(spec_path);
  const uie::SweepSpec spec = uie::parse_sweep_spec(in);
  if (out_path.empty()) out_path = spec.output;
  const auto rows = uie::sweep(spec, workers);
  if (out_path.empty()) {
    uie::write_sweep_csv(std::cout, rows);
  } else {
    auto out = open_out(out_path);
    uie::write_sweep_csv(out, rows);
  }
  return 0;
}

int do_fit(const std::string& in_path) {
  auto in = open_in(in_path);
  const auto fit = uie::fit_scaling(uie::read_sweep_csv(in));
  ordered_json cells = ordered_json::array();
  for (const auto& c : fit.cells)
    cells.push_back({{"n", c.cell.n},
                     {"k", c.cell.k},
                     {"F", c.cell.channels},
                     {"median_t_star", c.median_t_star},
                     {"predictor", c.predictor},
                     {"residual", c.residual}});
  std::cout << ordered_json{{"C", fit.constant},
                            {"max_relative_residual", fit.max_relative_residual},
                            {"cells", cells}}
                   .dump(2)
            << '\n';
  return 0;
}

int do_stabilize(const uie::StabilizationSpec& spec, std::vector<std::uint64_t> seeds,
                 unsigned seed_count) {
  if (seeds.empty()) {
    seeds.resize(seed_count);
    std::iota(seeds.begin(), seeds.end(), 1);
  }
  const auto stats = uie::stabilization_experiment(spec, seeds);
  ordered_json per_seed = ordered_json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i)
    per_seed.push_back({{"seed", seeds[i]},
                        {"recovery_round", stats.recovery[i] ? ordered_json(*stats.recovery[i])
                                                             : ordered_json(nullptr)}});
  std::cout << ordered_json{{"n", spec.nodes},
                            {"F", spec.channels},
                            {"p_star", spec.p_star},
                            {"hold_active", spec.hold_active},
                            {"median_recovery", optional_json(stats.median_recovery)},
                            {"censored", stats.censored},
                            {"predictor", stats.predictor},
                            {"runs", per_seed}}
                   .dump(2)
            << '\n';
  return 0;
}

int do_analyze(const std::string& trace_path, std::uint32_t n, std::uint32_t channels,
               uie::SafeRange range, std::uint64_t skip, double c2) {
  auto in = open_in(trace_path);
  std::vector<uie::RoundTrace> traces;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) traces.push_back(uie::parse_trace_line(line));
  const auto occupancy = uie::safe_range_occupancy(traces, range, channels, n, skip);
  const auto rate = uie::lemma5_deactivation_rate({traces}, range, channels, n, c2);
  ordered_json out{{"rounds", traces.size()}, {"safe_range_occupancy", optional_json(occupancy)}};
  if (rate) {
    out["slot2_deactivation_mean"] = rate->mean;
    out["slot2_fraction_at_least_c2F"] = rate->fraction_at_least;
    out["qualifying_rounds"] = rate->qualifying_rounds;
  } else {
    out["slot2_deactivation_mean"] = nullptr;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int do_oracle(const std::string& check, unsigned trials, std::uint64_t seed, double zeta) {
  uie::StreamRandom rand(seed, 0);
  // Lengths 1..20; entries in (0, 1/2) for q1q0 and [0, 1/2) for product-bound.
  auto random_vector = [&](bool open_at_zero) {
    std::vector<double> v(1 + rand.index(20));
    for (auto& x : v) {
      do x = 0.5 * rand.uniform();
      while (open_at_zero && x == 0.0);
    }
    return v;
  };
  ordered_json out{{"check", check}, {"trials", trials}, {"seed", seed}};
  if (check == "q1q0") {
    unsigned failures = 0;
    for (unsigned i = 0; i < trials; ++i)
      if (!uie::oracles::verify_q1_q0_bound(random_vector(true))) ++failures;
    out["failures"] = failures;
    std::cout << out.dump(2) << '\n';
    return failures == 0 ? 0 : 1;
  }
  if (check == "product-bound") {
    unsigned failures = 0;
    for (unsigned i = 0; i < trials; ++i)
      if (!uie::oracles::product_bound_check(random_vector(false))) ++failures;
    out["failures"] = failures;
    std::cout << out.dump(2) << '\n';
    return failures == 0 ? 0 : 1;
  }
  if (check == "bins") {
    constexpr std::size_t kBins = 64;
    const std::size_t balls = static_cast<std::size_t>(std::llround(kBins / zeta));
    const std::vector<double> weighted(balls, zeta);
    const std::vector<double> unit(kBins * 16, 1.0);
    std::vector<double> good, crowded;
    unsigned good_ok = 0, crowded_ok = 0;
    for (unsigned i = 0; i < trials; ++i) {
      const auto w = uie::oracles::balls_in_bins_trial(kBins, weighted, 1.0, rand);
      const auto u = uie::oracles::balls_in_bins_trial(kBins, unit, 16.0, rand);
      good.push_back(static_cast<double>(w.good_weight_bins));
      crowded.push_back(static_cast<double>(u.bins_with_2plus));
      if (4 * w.good_weight_bins >= 3 * kBins) ++good_ok;
      if (4 * u.bins_with_2plus >= 3 * kBins) ++crowded_ok;
    }
    out["bins"] = kBins;
    out["zeta"] = zeta;
    out["weighted_median_good_bins"] = optional_json(uie::median(good));
    out["weighted_fraction_trials_3_4"] = trials ? double(good_ok) / trials : 0.0;
    out["unweighted_median_bins_2plus"] = optional_json(uie::median(crowded));
    out["unweighted_fraction_trials_3_4"] = trials ? double(crowded_ok) / trials : 0.0;
    std::cout << out.dump(2) << '\n';
    return 0;
  }
  if (check == "zeta") {
    const auto z = uie::oracles::zeta_conditions(zeta);
    std::cout << ordered_json{{"zeta", zeta},
                              {"lower_edge_value", z.lower_edge_value},
                              {"lower_edge_holds", z.lower_edge_holds},
                              {"upper_edge_value", z.upper_edge_value},
                              {"upper_edge_holds", z.upper_edge_holds}}
                     .dump(2)
              << '\n';
    return 0;
  }
  throw std::invalid_argument("unknown oracle check '" + check + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uniform information exchange simulator on multi-channel radio networks"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one simulation");
  run_cmd->add_option("--nodes,-n", run.config.nodes, "Number of nodes")->required();
  run_cmd->add_option("--sources,-k", run.config.sources, "Number of source nodes")->required();
  run_cmd->add_option("--channels,-F", run.config.channels, "Number of channels")->required();
  run_cmd->add_option("--zeta", run.config.zeta, "Cap and initial value of p and q")
      ->capture_default_str();
  run_cmd->add_option("--seed", run.config.seed, "Master seed")->capture_default_str();
  run_cmd->add_option("--max-rounds", run.max_rounds,
                      "Round cap (default 64(k/F + F log2 n) + 10^4)");
  run_cmd->add_option("--trace-out", run.trace_out, "JSON-lines trace file");
  run_cmd->add_option("--summary-out", run.summary_out, "JSON summary file (default stdout)");
  run_cmd->add_flag("--check-invariants", run.config.check_invariants,
                    "Check invariants after every round");

  std::string spec_path, sweep_out;
  unsigned workers = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep");
  sweep_cmd->add_option("--spec", spec_path, "Sweep spec file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep_out, "CSV output (default: spec 'output' or stdout)");
  sweep_cmd->add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");

  std::string fit_in;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the completion-time scaling law");
  fit_cmd->add_option("--in", fit_in, "Sweep CSV")->required()->check(CLI::ExistingFile);

  uie::StabilizationSpec stab;
  std::vector<std::uint64_t> stab_seeds;
  unsigned stab_seed_count = 20;
  auto* stab_cmd = app.add_subcommand("stabilize", "Recovery of the total p into the safe range");
  stab_cmd->add_option("--p-star", stab.p_star, "Initial total p over all nodes")->required();
  stab_cmd->add_option("--nodes,-n", stab.nodes, "Number of nodes (all active)")
      ->capture_default_str();
  stab_cmd->add_option("--channels,-F", stab.channels, "Number of channels")->capture_default_str();
  stab_cmd->add_option("--zeta", stab.zeta)->capture_default_str();
  stab_cmd->add_option("--alpha1", stab.range.alpha1)->capture_default_str();
  stab_cmd->add_option("--alpha2", stab.range.alpha2)->capture_default_str();
  stab_cmd->add_option("--max-rounds", stab.max_rounds)->capture_default_str();
  stab_cmd->add_flag("--hold-active,!--no-hold-active", stab.hold_active,
                     "Suppress deactivation (default on)");
  stab_cmd->add_option("--seeds", stab_seeds, "Explicit seed list");
  stab_cmd->add_option("--seed-count", stab_seed_count, "Seeds 1..N when --seeds is absent")
      ->capture_default_str();

  std::string trace_path;
  std::uint32_t an_nodes = 0, an_channels = 0;
  uie::SafeRange an_range;
  std::uint64_t an_skip = 0;
  double an_c2 = 0.05;
  auto* an_cmd = app.add_subcommand("analyze", "Safe-range statistics of a JSON-lines trace");
  an_cmd->add_option("--trace", trace_path)->required()->check(CLI::ExistingFile);
  an_cmd->add_option("--nodes,-n", an_nodes)->required();
  an_cmd->add_option("--channels,-F", an_channels)->required();
  an_cmd->add_option("--alpha1", an_range.alpha1)->capture_default_str();
  an_cmd->add_option("--alpha2", an_range.alpha2)->capture_default_str();
  an_cmd->add_option("--skip", an_skip, "Ignore rounds before this one")->capture_default_str();
  an_cmd->add_option("--c2", an_c2, "Report rounds with >= c2 F slot-2 deactivations")
      ->capture_default_str();

  std::string oracle_check;
  unsigned oracle_trials = 1000;
  std::uint64_t oracle_seed = 1;
  double oracle_zeta = uie::kDefaultZeta;
  auto* or_cmd = app.add_subcommand("oracle", "Analytic and Monte-Carlo oracle checks");
  or_cmd->add_option("check", oracle_check, "q1q0 | product-bound | bins | zeta")
      ->required()
      ->check(CLI::IsMember({"q1q0", "product-bound", "bins", "zeta"}));
  or_cmd->add_option("--trials", oracle_trials)->capture_default_str();
  or_cmd->add_option("--seed", oracle_seed)->capture_default_str();
  or_cmd->add_option("--zeta", oracle_zeta)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return do_run(run);
    if (*sweep_cmd) return do_sweep(spec_path, sweep_out, workers);
    if (*fit_cmd) return do_fit(fit_in);
    if (*stab_cmd) return do_stabilize(stab, stab_seeds, stab_seed_count);
    if (*an_cmd) return do_analyze(trace_path, an_nodes, an_channels, an_range, an_skip, an_c2);
    if (*or_cmd) return do_oracle(oracle_check, oracle_trials, oracle_seed, oracle_zeta);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
