#pragma once

// Model input encoding and in-memory training sets. Inputs are
// channels-first [3][H][W]: u at sensors, v at sensors, sensor mask.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "rooftop/field.hpp"
#include "rooftop/placement.hpp"

namespace rooftop::nn {

inline constexpr int kInputChannels = 3;
inline constexpr int kOutputChannels = 2;

struct ModelInput {
  GridSpec grid = kReferenceGrid;
  std::vector<double> values;  // [3][ny][nx]

  [[nodiscard]] double at(int c, int x, int y) const {
    return values[(static_cast<std::size_t>(c) * grid.ny + y) * grid.nx + x];
  }
};

/// Readings (k u-values then k v-values) placed at the layout cells.
inline ModelInput encode_readings(const SensorLayout& layout, std::span<const double> readings) {
  const GridSpec g = layout.grid();
  const auto k = static_cast<std::size_t>(layout.k());
  if (readings.size() != 2 * k) throw DataError("reading count does not match layout");
  ModelInput in{g, std::vector<double>(static_cast<std::size_t>(kInputChannels) * g.cells(), 0.0)};
  const std::size_t plane = g.cells();
  for (std::size_t i = 0; i < k; ++i) {
    const Cell c = layout.cells()[i];
    const std::size_t at = static_cast<std::size_t>(c.y) * g.nx + c.x;
    in.values[at] = readings[i];
    in.values[plane + at] = readings[k + i];
    in.values[2 * plane + at] = 1.0;
  }
  return in;
}

inline ModelInput encode_input(const SensorLayout& layout, const VelocityField& field) {
  return encode_readings(layout, layout.read(field));
}

/// Field -> channels-first [2][ny][nx].
inline void field_to_planes(const VelocityField& f, std::span<double> out) {
  const GridSpec g = f.grid();
  const std::size_t plane = g.cells();
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x) {
      const std::size_t at = static_cast<std::size_t>(y) * g.nx + x;
      out[at] = f.u(x, y);
      out[plane + at] = f.v(x, y);
    }
}

template <class T>
VelocityField planes_to_field(std::span<const T> planes, GridSpec g) {
  VelocityField f(g);
  const std::size_t plane = g.cells();
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x) {
      const std::size_t at = static_cast<std::size_t>(y) * g.nx + x;
      f.at(x, y, 0) = static_cast<double>(planes[at]);
      f.at(x, y, 1) = static_cast<double>(planes[plane + at]);
    }
  return f;
}

/// Encoded inputs and channels-first targets, sample-major.
struct TrainingSet {
  GridSpec grid = kReferenceGrid;
  std::vector<double> inputs;
  std::vector<double> targets;

  [[nodiscard]] std::size_t input_size() const { return static_cast<std::size_t>(kInputChannels) * grid.cells(); }
  [[nodiscard]] std::size_t target_size() const { return static_cast<std::size_t>(kOutputChannels) * grid.cells(); }
  [[nodiscard]] std::size_t size() const { return targets.size() / target_size(); }

  void add(const ModelInput& in, const VelocityField& truth) {
    inputs.insert(inputs.end(), in.values.begin(), in.values.end());
    const std::size_t off = targets.size();
    targets.resize(off + target_size());
    field_to_planes(truth, std::span<double>(targets).subspan(off));
  }
};

/// Every `stride`-th snapshot of each realization, encoded with `layout`.
inline TrainingSet make_training_set(std::span<const Realization* const> runs, const SensorLayout& layout,
                                     int stride = 1) {
  if (stride < 1) throw ConfigError("stride must be positive");
  TrainingSet set;
  set.grid = layout.grid();
  for (const Realization* r : runs)
    for (std::size_t t = 0; t < r->snapshots.size(); t += static_cast<std::size_t>(stride))
      set.add(encode_input(layout, r->snapshots[t]), r->snapshots[t]);
  return set;
}

/// Fisher-Yates permutation driven directly by the engine's output, so the
/// order does not depend on the standard library's distributions.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

/// Standard normal plane(s) from a seed (Box-Muller over raw engine output).
template <class T>
void gaussian_fill(std::span<T> out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * kScale;
    const double u2 = static_cast<double>(rng() >> 11) * kScale;
    const double r = std::sqrt(-2.0 * std::log(u1));
    out[i] = static_cast<T>(r * std::cos(2.0 * std::numbers::pi * u2));
    if (i + 1 < out.size()) out[i + 1] = static_cast<T>(r * std::sin(2.0 * std::numbers::pi * u2));
  }
}

}  // namespace rooftop::nn
