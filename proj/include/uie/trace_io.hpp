#pragma once

// Stable on-disk formats for single runs.
//
// Trace: JSON lines, one object per round, keys in this order:
//   {"t", "active", "sum_p", "sum_q", "d2", "d4", "s1", "s3"}
// Summary: one JSON object with the scalar fields of SimResult plus the
// configuration that produced it. Absent rounds are written as null.

#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "uie/engine.hpp"

namespace uie {

inline std::string_view to_string(SimStatus s) {
  return s == SimStatus::Completed ? "Completed" : "RoundCapExceeded";
}

inline std::optional<SimStatus> parse_status(std::string_view s) {
  if (s == "Completed") return SimStatus::Completed;
  if (s == "RoundCapExceeded") return SimStatus::RoundCapExceeded;
  return std::nullopt;
}

inline nlohmann::ordered_json trace_json(const RoundTrace& tr) {
  return {{"t", tr.t},   {"active", tr.active}, {"sum_p", tr.sum_p}, {"sum_q", tr.sum_q},
          {"d2", tr.d2}, {"d4", tr.d4},         {"s1", tr.s1},       {"s3", tr.s3}};
}

inline void write_trace_line(std::ostream& out, const RoundTrace& tr) {
  out << trace_json(tr).dump() << '\n';
}

inline RoundTrace parse_trace_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  RoundTrace tr;
  tr.t = j.at("t").get<std::uint64_t>();
  tr.active = j.at("active").get<std::uint32_t>();
  tr.sum_p = j.at("sum_p").get<double>();
  tr.sum_q = j.at("sum_q").get<double>();
  tr.d2 = j.at("d2").get<std::uint32_t>();
  tr.d4 = j.at("d4").get<std::uint32_t>();
  tr.s1 = j.at("s1").get<std::uint32_t>();
  tr.s3 = j.at("s3").get<bool>();
  return tr;
}

namespace detail {

inline nlohmann::ordered_json optional_round(const std::optional<std::uint64_t>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline nlohmann::ordered_json summary_json(const SimConfig& config, const SimResult& r) {
  return {{"n", config.nodes},
          {"k", config.sources},
          {"F", config.channels},
          {"zeta", config.zeta},
          {"seed", config.seed},
          {"status", to_string(r.status)},
          {"rounds", r.rounds},
          {"completion_round", detail::optional_round(r.completion_round)},
          {"first_single_active_round", detail::optional_round(r.first_single_active_round)},
          {"first_below_Flogn_round", detail::optional_round(r.first_below_flogn_round)},
          {"violations", r.violations.size()}};
}

}  // namespace uie
