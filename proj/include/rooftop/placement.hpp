#pragma once

// Sensor layouts: Voronoi-uniform baseline (Lloyd's iteration on the
// lattice), bounded random perturbation, and layouts taken from a ranking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rooftop/errors.hpp"
#include "rooftop/field.hpp"
#include "rooftop/hash.hpp"

namespace rooftop {

struct Cell {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

class SensorLayout {
 public:
  SensorLayout() = default;
  SensorLayout(GridSpec grid, std::vector<Cell> cells) : grid_(grid), cells_(std::move(cells)) {
    validate();
  }

  [[nodiscard]] const GridSpec& grid() const { return grid_; }
  [[nodiscard]] const std::vector<Cell>& cells() const { return cells_; }
  [[nodiscard]] int k() const { return static_cast<int>(cells_.size()); }

  /// Sensor readings: k u-values followed by k v-values.
  [[nodiscard]] std::vector<double> read(const VelocityField& f) const {
    std::vector<double> out(2 * cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      out[i] = f.u(cells_[i].x, cells_[i].y);
      out[cells_.size() + i] = f.v(cells_[i].x, cells_[i].y);
    }
    return out;
  }

  [[nodiscard]] bool contains(Cell c) const {
    return std::find(cells_.begin(), cells_.end(), c) != cells_.end();
  }

  friend bool operator==(const SensorLayout&, const SensorLayout&) = default;

 private:
  void validate() const {
    const int k = static_cast<int>(cells_.size());
    if (k < 1 || k > grid_.cells()) throw ConfigError("sensor count out of range");
    std::set<Cell> seen;
    for (const auto& c : cells_) {
      if (!grid_.in_bounds(c.x, c.y)) throw ConfigError("sensor cell out of bounds");
      if (!seen.insert(c).second) throw ConfigError("duplicate sensor cell");
    }
  }

  GridSpec grid_{};
  std::vector<Cell> cells_;
};

namespace detail {

struct Point {
  double x, y;
};

inline double dist2(Point a, Point b) { return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y); }

inline std::vector<Point> lattice_points(GridSpec g) {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(g.cells()));
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
  return pts;
}

inline int nearest(const std::vector<Point>& centers, Point p) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = dist2(centers[c], p);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

struct LloydResult {
  std::vector<Point> centers;
  double inertia = 0.0;
};

inline LloydResult lloyd(const std::vector<Point>& pts, int k, std::mt19937_64& rng, int max_iter) {
  // k-means++ seeding.
  std::vector<Point> centers;
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(pts.size());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) m = std::min(m, dist2(c, pts[i]));
      d2[i] = m;
      total += m;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    const double target = u(rng);
    double acc = 0.0;
    std::size_t chosen = pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      chosen = i;
      if (acc >= target) break;
    }
    centers.push_back(pts[chosen]);
  }

  std::vector<int> assign(pts.size(), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const int a = nearest(centers, pts[i]);
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Point> sum(static_cast<std::size_t>(k), Point{0.0, 0.0});
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sum[assign[i]].x += pts[i].x;
      sum[assign[i]].y += pts[i].y;
      ++count[assign[i]];
    }
    for (int c = 0; c < k; ++c)
      if (count[c] > 0) centers[c] = {sum[c].x / count[c], sum[c].y / count[c]};
  }
  LloydResult res{centers, 0.0};
  for (const auto& p : pts) res.inertia += dist2(centers[nearest(centers, p)], p);
  return res;
}

}  // namespace detail

inline constexpr int kLloydMaxIterations = 100;
inline constexpr int kLloydRestarts = 10;

/// Voronoi-uniform layout: Lloyd's iteration over lattice cells from seeded
/// k-means++ starts (best inertia of several restarts); each sensor is the
/// free lattice cell nearest its region centroid.
inline SensorLayout uniform_layout(GridSpec grid, int k, std::uint64_t seed) {
  if (k < 1 || k > grid.cells())
    throw ConfigError("k=" + std::to_string(k) + " out of range [1, " + std::to_string(grid.cells()) + "]");
  const auto pts = detail::lattice_points(grid);
  detail::LloydResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < kLloydRestarts; ++restart) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(restart)));
    auto res = detail::lloyd(pts, k, rng, kLloydMaxIterations);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  std::vector<bool> used(pts.size(), false);
  std::vector<Cell> cells;
  for (const auto& c : best.centers) {
    std::size_t bi = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (used[i]) continue;
      const double d = detail::dist2(c, pts[i]);
      if (d < bd) {
        bd = d;
        bi = i;
      }
    }
    used[bi] = true;
    cells.push_back({static_cast<int>(bi) % grid.nx, static_cast<int>(bi) / grid.nx});
  }
  std::sort(cells.begin(), cells.end(), [](Cell a, Cell b) { return std::pair(a.y, a.x) < std::pair(b.y, b.x); });
  return {grid, std::move(cells)};
}

/// Number of lattice cells whose nearest sensor is each layout cell
/// (ties to the earlier sensor).
inline std::vector<int> voronoi_populations(const SensorLayout& layout) {
  std::vector<detail::Point> centers;
  for (const auto& c : layout.cells()) centers.push_back({double(c.x), double(c.y)});
  std::vector<int> counts(centers.size(), 0);
  for (const auto& p : detail::lattice_points(layout.grid())) ++counts[detail::nearest(centers, p)];
  return counts;
}

inline constexpr int kPerturbAttempts = 50;

/// Moves every sensor by independent offsets in {-1, 0, +1} per axis, clamped
/// to the domain. A draw that lands on an already-placed sensor is redrawn;
/// after kPerturbAttempts failures the sensor stays at its nominal cell, or,
/// if that is taken too, moves to the nearest free cell.
inline SensorLayout perturb_layout(const SensorLayout& layout, std::uint64_t seed) {
  const auto& g = layout.grid();
  std::mt19937_64 rng(mix_seed(seed, 0x5045525455524245ULL));
  std::uniform_int_distribution<int> offset(-1, 1);
  std::set<Cell> placed;
  std::vector<Cell> out;
  out.reserve(layout.cells().size());
  for (const auto& c : layout.cells()) {
    bool done = false;
    for (int attempt = 0; attempt < kPerturbAttempts && !done; ++attempt) {
      const int dx = offset(rng);
      const int dy = offset(rng);
      const Cell cand{std::clamp(c.x + dx, 0, g.nx - 1), std::clamp(c.y + dy, 0, g.ny - 1)};
      if (!placed.contains(cand)) {
        out.push_back(cand);
        placed.insert(cand);
        done = true;
      }
    }
    if (done) continue;
    Cell fallback = c;
    if (placed.contains(c)) {
      double bd = std::numeric_limits<double>::infinity();
      for (int y = 0; y < g.ny; ++y)
        for (int x = 0; x < g.nx; ++x) {
          const Cell cand{x, y};
          if (placed.contains(cand)) continue;
          const double d = double(x - c.x) * (x - c.x) + double(y - c.y) * (y - c.y);
          if (d < bd) {
            bd = d;
            fallback = cand;
          }
        }
    }
    out.push_back(fallback);
    placed.insert(fallback);
  }
  return {g, std::move(out)};
}

}  // namespace rooftop
