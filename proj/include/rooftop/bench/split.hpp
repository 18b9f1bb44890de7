#pragma once

// Train/test assignment at realization granularity.

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rooftop/errors.hpp"
#include "rooftop/field.hpp"

namespace rooftop::bench {

enum class Strategy { Sdt, Mdt };

inline std::string to_string(Strategy s) { return s == Strategy::Sdt ? "sdt" : "mdt"; }

inline Strategy parse_strategy(const std::string& s) {
  if (s == "sdt" || s == "SDT") return Strategy::Sdt;
  if (s == "mdt" || s == "MDT") return Strategy::Mdt;
  throw ConfigError("unknown split '" + s + "' (expected sdt or mdt)");
}

inline constexpr double kSdtTrainDirection = 0.0;

struct SplitPlan {
  Strategy strategy = Strategy::Mdt;
  std::vector<std::size_t> train;  // indices into the realization list
  std::vector<std::size_t> test;
  double val_fraction = 0.2;
  std::uint64_t val_seed = 42;
};

/// SDT: every 0-degree run trains, all other directions test.
/// MDT: the lowest-numbered run of each direction trains, the rest test.
inline SplitPlan build_split(std::span<const Realization> runs, Strategy strategy) {
  SplitPlan plan;
  plan.strategy = strategy;
  std::map<double, std::vector<std::size_t>> by_dir;
  for (std::size_t i = 0; i < runs.size(); ++i) by_dir[runs[i].direction_deg].push_back(i);

  if (strategy == Strategy::Sdt) {
    for (std::size_t i = 0; i < runs.size(); ++i)
      (runs[i].direction_deg == kSdtTrainDirection ? plan.train : plan.test).push_back(i);
    if (plan.train.empty()) throw DataError("SDT split needs at least one 0-degree realization");
    if (plan.test.empty()) throw DataError("SDT split needs a realization at another direction");
    return plan;
  }

  if (by_dir.size() < 2) throw DataError("MDT split needs at least two wind directions");
  for (const auto& [dir, idx] : by_dir) {
    if (idx.size() < 2)
      throw DataError("MDT split needs at least two realizations at " + format_direction(dir) + " degrees");
    std::size_t first = idx.front();
    for (std::size_t i : idx)
      if (runs[i].run_index < runs[first].run_index) first = i;
    for (std::size_t i : idx) (i == first ? plan.train : plan.test).push_back(i);
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

}  // namespace rooftop::bench
