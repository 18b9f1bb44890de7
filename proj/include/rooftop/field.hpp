#pragma once

// Velocity-field data model and per-realization temporal statistics.
//
// All in-memory velocities are dimensionless (velocity / U_H). A field is
// stored as [y][x][component]; the vectorized form used by POD and QR is
// component-major: index = c * (nx * ny) + y * nx + x.

#include <cmath>
#include <cstdio>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rooftop/errors.hpp"

namespace rooftop {

struct GridSpec {
  int nx = 15;
  int ny = 15;
  int components = 2;

  [[nodiscard]] constexpr int cells() const { return nx * ny; }
  [[nodiscard]] constexpr int dof() const { return nx * ny * components; }
  [[nodiscard]] constexpr bool in_bounds(int x, int y) const {
    return x >= 0 && x < nx && y >= 0 && y < ny;
  }

  void validate() const {
    if (nx < 2 || ny < 2) throw DataError("grid must be at least 2x2");
    if (components != 2) throw DataError("grid must carry exactly 2 velocity components");
  }

  friend constexpr bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline constexpr GridSpec kReferenceGrid{15, 15, 2};

/// A single scalar value per cell, row-major [y][x].
struct ScalarGrid {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  ScalarGrid() = default;
  ScalarGrid(int nx_, int ny_, double fill = 0.0)
      : nx(nx_), ny(ny_), values(static_cast<std::size_t>(nx_) * ny_, fill) {}

  [[nodiscard]] double& at(int x, int y) { return values[static_cast<std::size_t>(y) * nx + x]; }
  [[nodiscard]] double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * nx + x];
  }
};

class VelocityField {
 public:
  VelocityField() = default;
  explicit VelocityField(GridSpec grid)
      : grid_(grid), values_(static_cast<std::size_t>(grid.dof()), 0.0) {}
  VelocityField(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(grid_.dof()))
      throw DataError("field value count does not match grid");
  }

  [[nodiscard]] const GridSpec& grid() const { return grid_; }

  [[nodiscard]] double& at(int x, int y, int c) { return values_[index(x, y, c)]; }
  [[nodiscard]] double at(int x, int y, int c) const { return values_[index(x, y, c)]; }
  [[nodiscard]] double u(int x, int y) const { return at(x, y, 0); }
  [[nodiscard]] double v(int x, int y) const { return at(x, y, 1); }

  /// Raw [y][x][c] storage.
  [[nodiscard]] std::span<const double> raw() const { return values_; }
  [[nodiscard]] std::span<double> raw() { return values_; }

  /// One component as a scalar grid.
  [[nodiscard]] ScalarGrid plane(int c) const {
    ScalarGrid g(grid_.nx, grid_.ny);
    for (int y = 0; y < grid_.ny; ++y)
      for (int x = 0; x < grid_.nx; ++x) g.at(x, y) = at(x, y, c);
    return g;
  }

  [[nodiscard]] bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const VelocityField&, const VelocityField&) = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * grid_.nx + x) * grid_.components + c;
  }

  GridSpec grid_{};
  std::vector<double> values_;
};

struct Realization {
  double direction_deg = 0.0;
  int run_index = 1;
  double dt = 0.001;
  double u_ref = 0.70;
  double z_over_h = 1.05;
  std::vector<VelocityField> snapshots;

  [[nodiscard]] GridSpec grid() const {
    return snapshots.empty() ? kReferenceGrid : snapshots.front().grid();
  }

  /// Short stable identifier, e.g. "dir22.5_run2".
  [[nodiscard]] std::string label() const;

  void validate() const {
    if (!(dt > 0.0)) throw DataError("realization dt must be positive");
    if (!(u_ref > 0.0)) throw DataError("realization u_ref must be positive");
    if (run_index < 1) throw DataError("run_index must be >= 1");
    for (const auto& s : snapshots) {
      if (!(s.grid() == grid())) throw DataError("snapshots do not share one grid");
      if (!s.all_finite()) throw DataError("non-finite velocity value");
    }
  }
};

inline std::string format_direction(double deg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", deg);
  return buf;
}

inline std::string Realization::label() const {
  return "dir" + format_direction(direction_deg) + "_run" + std::to_string(run_index);
}

struct FieldStatistics {
  ScalarGrid ws_mean;
  ScalarGrid ws_std;
  ScalarGrid variance_map;
};

/// Per-cell horizontal speed sqrt(u^2 + v^2); inputs are already normalized.
inline ScalarGrid wind_speed(const VelocityField& f) {
  const auto& g = f.grid();
  ScalarGrid s(g.nx, g.ny);
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x) s.at(x, y) = std::hypot(f.u(x, y), f.v(x, y));
  return s;
}

/// Temporal mean and population (1/N) standard deviation of wind speed.
inline FieldStatistics temporal_statistics(std::span<const VelocityField> snapshots) {
  if (snapshots.size() < 2) throw DataError("temporal statistics need at least 2 snapshots");
  const auto g = snapshots.front().grid();
  const std::size_t cells = static_cast<std::size_t>(g.cells());
  const double n = static_cast<double>(snapshots.size());

  // Two passes over the data: mean first, then centered second moment.
  std::vector<ScalarGrid> speeds;
  speeds.reserve(snapshots.size());
  for (const auto& s : snapshots) speeds.push_back(wind_speed(s));

  FieldStatistics st{ScalarGrid(g.nx, g.ny), ScalarGrid(g.nx, g.ny), ScalarGrid(g.nx, g.ny)};
  for (std::size_t i = 0; i < cells; ++i) {
    double sum = 0.0;
    for (const auto& sp : speeds) sum += sp.values[i];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& sp : speeds) {
      const double d = sp.values[i] - mean;
      ss += d * d;
    }
    const double var = ss / n;
    st.ws_mean.values[i] = mean;
    st.variance_map.values[i] = var;
    st.ws_std.values[i] = std::sqrt(var);
  }
  return st;
}

inline FieldStatistics temporal_statistics(const Realization& r) {
  return temporal_statistics(std::span<const VelocityField>(r.snapshots));
}

/// Component-major flattening: index = c * (nx*ny) + y * nx + x.
inline std::vector<double> vectorize(const VelocityField& f) {
  const auto& g = f.grid();
  const int cells = g.cells();
  std::vector<double> out(static_cast<std::size_t>(g.dof()));
  for (int c = 0; c < g.components; ++c)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) out[c * cells + y * g.nx + x] = f.at(x, y, c);
  return out;
}

inline VelocityField unvectorize(std::span<const double> v, GridSpec grid = kReferenceGrid) {
  if (v.size() != static_cast<std::size_t>(grid.dof()))
    throw DataError("vector length " + std::to_string(v.size()) + " does not match dof " +
                    std::to_string(grid.dof()));
  VelocityField f(grid);
  const int cells = grid.cells();
  for (int c = 0; c < grid.components; ++c)
    for (int y = 0; y < grid.ny; ++y)
      for (int x = 0; x < grid.nx; ++x) f.at(x, y, c) = v[c * cells + y * grid.nx + x];
  return f;
}

/// Elementwise mean of a set of fields.
inline VelocityField mean_field(std::span<const VelocityField> fields) {
  if (fields.empty()) throw DataError("mean of an empty field set");
  VelocityField m(fields.front().grid());
  auto out = m.raw();
  for (const auto& f : fields) {
    auto in = f.raw();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
  }
  const double n = static_cast<double>(fields.size());
  for (double& v : out) v /= n;
  return m;
}

}  // namespace rooftop
