#pragma once

// Deterministic synthetic rooftop flow: an analytic mean field per approach
// direction plus spatially correlated Gaussian fluctuations.
//
// Coordinates below are normalized, X = x / (nx - 1) streamwise and
// Y = y / (ny - 1) spanwise, both in [0, 1].

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "rooftop/errors.hpp"
#include "rooftop/field.hpp"
#include "rooftop/hash.hpp"

namespace rooftop {

struct SynthConfig {
  double direction = 0.0;
  int n_snapshots = 1000;
  std::uint64_t seed = 1;
  double fluct_scale = 0.1;
  double corr_len = 3.0;
  int run_index = 1;
  GridSpec grid = kReferenceGrid;

  void validate() const {
    if (n_snapshots < 1) throw ConfigError("n_snapshots must be >= 1");
    if (fluct_scale < 0.0) throw ConfigError("fluct_scale must be >= 0");
    if (!(corr_len > 0.0)) throw ConfigError("corr_len must be > 0");
    grid.validate();
  }
};

namespace synth_constants {
// 0 deg: separation bubble on the upwind half, reattachment mid-roof.
inline constexpr double kBubbleSpeed = 0.25;
inline constexpr double kRecoveredSpeed = 0.95;
inline constexpr double kReattachX = 0.45;
inline constexpr double kReattachWidth = 0.08;
inline constexpr double kSpanwiseDip = 0.15;
inline constexpr double kBubbleV = 0.04;
// 45 deg: diagonal channelling with two corner low-speed lobes.
inline constexpr double kDiagBase = 0.35;
inline constexpr double kDiagPeak = 0.75;
inline constexpr double kDiagWidth = 0.3;
inline constexpr double kCornerDrop = 0.15;
inline constexpr double kCornerWidth = 0.25;
inline constexpr double kVortexTurnDeg = 25.0;
inline constexpr double kVortexTurnWidth = 0.25;
// 22.5 deg: asymmetric blend.
inline constexpr double kBlend0 = 0.55;
inline constexpr double kSpanAsymBase = 0.85;
inline constexpr double kSpanAsymSlope = 0.3;
inline constexpr double kObliqueTurnDeg = 15.0;
inline constexpr double kObliqueTurnWidth = 0.3;
// Fluctuation intensity templates (dimensionless, multiplied by fluct_scale).
inline constexpr double kStdBase = 0.5;
inline constexpr double kStdEdge = 0.9;
inline constexpr double kStdEdgeX = 0.1;
inline constexpr double kStdEdgeWidth = 0.25;
inline constexpr double kStdOffDiag = 0.8;
inline constexpr double kStdCorner = 0.3;
}  // namespace synth_constants

namespace detail {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double gauss(double d, double w) { return std::exp(-(d / w) * (d / w)); }
inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

inline double speed_0deg(double X, double Y) {
  using namespace synth_constants;
  const double stream =
      kBubbleSpeed + (kRecoveredSpeed - kBubbleSpeed) * logistic((X - kReattachX) / kReattachWidth);
  const double span = 1.0 - kSpanwiseDip * (2.0 * Y - 1.0) * (2.0 * Y - 1.0);
  return stream * span;
}

inline double speed_45deg(double X, double Y) {
  using namespace synth_constants;
  const double d = (X - Y) / std::numbers::sqrt2;
  const double c1 = std::hypot(X, Y - 1.0);
  const double c2 = std::hypot(X - 1.0, Y);
  return kDiagBase + kDiagPeak * gauss(d, kDiagWidth) -
         kCornerDrop * (gauss(c1, kCornerWidth) + gauss(c2, kCornerWidth));
}

inline double std_0deg(double X, double /*Y*/) {
  using namespace synth_constants;
  return kStdBase + kStdEdge * gauss(X - kStdEdgeX, kStdEdgeWidth);
}

inline double std_45deg(double X, double Y) {
  using namespace synth_constants;
  const double d = (X - Y) / std::numbers::sqrt2;
  return kStdBase + kStdOffDiag * (1.0 - gauss(d, kDiagWidth));
}

inline void check_direction(double direction) {
  if (direction != 0.0 && direction != 22.5 && direction != 45.0)
    throw ConfigError("unsupported synthetic direction " + format_direction(direction) +
                      " (expected 0, 22.5 or 45)");
}

}  // namespace detail

/// Analytic mean field for one approach direction.
inline VelocityField synth_mean_field(double direction, GridSpec grid = kReferenceGrid) {
  using namespace synth_constants;
  detail::check_direction(direction);
  VelocityField f(grid);
  for (int y = 0; y < grid.ny; ++y) {
    for (int x = 0; x < grid.nx; ++x) {
      const double X = static_cast<double>(x) / (grid.nx - 1);
      const double Y = static_cast<double>(y) / (grid.ny - 1);
      double u = 0.0, v = 0.0;
      if (direction == 0.0) {
        u = detail::speed_0deg(X, Y);
        v = kBubbleV * (2.0 * Y - 1.0) * detail::gauss(X - 0.3, 0.25);
      } else if (direction == 45.0) {
        const double d = (X - Y) / std::numbers::sqrt2;
        const double s = detail::speed_45deg(X, Y);
        const double ang = detail::deg2rad(45.0 + kVortexTurnDeg * std::tanh(d / kVortexTurnWidth));
        u = s * std::cos(ang);
        v = s * std::sin(ang);
      } else {
        const double s = (kBlend0 * detail::speed_0deg(X, Y) + (1.0 - kBlend0) * detail::speed_45deg(X, Y)) *
                         (kSpanAsymBase + kSpanAsymSlope * Y);
        const double ang = detail::deg2rad(22.5 + kObliqueTurnDeg * std::tanh((X - Y) / kObliqueTurnWidth));
        u = s * std::cos(ang);
        v = s * std::sin(ang);
      }
      f.at(x, y, 0) = u;
      f.at(x, y, 1) = v;
    }
  }
  return f;
}

/// Per-cell fluctuation intensity template (applied to both components).
inline ScalarGrid synth_std_template(double direction, GridSpec grid = kReferenceGrid) {
  using namespace synth_constants;
  detail::check_direction(direction);
  ScalarGrid s(grid.nx, grid.ny);
  for (int y = 0; y < grid.ny; ++y) {
    for (int x = 0; x < grid.nx; ++x) {
      const double X = static_cast<double>(x) / (grid.nx - 1);
      const double Y = static_cast<double>(y) / (grid.ny - 1);
      if (direction == 0.0) {
        s.at(x, y) = detail::std_0deg(X, Y);
      } else if (direction == 45.0) {
        s.at(x, y) = detail::std_45deg(X, Y);
      } else {
        s.at(x, y) = kBlend0 * detail::std_0deg(X, Y) + (1.0 - kBlend0) * detail::std_45deg(X, Y) +
                     kStdCorner * detail::gauss(std::hypot(X, Y), 0.3);
      }
    }
  }
  return s;
}

/// Unit-variance Gaussian field with isotropic Gaussian correlation of length
/// `corr_len` cells. White noise is drawn on a grid extended by the kernel
/// radius so every output cell sees the full kernel.
template <class Rng>
ScalarGrid correlated_noise(int nx, int ny, double corr_len, Rng& rng) {
  const int radius = static_cast<int>(std::ceil(3.0 * corr_len));
  std::vector<double> kernel;
  double norm2 = 0.0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double k = std::exp(-(dx * dx + dy * dy) / (2.0 * corr_len * corr_len));
      kernel.push_back(k);
      norm2 += k * k;
    }
  const double inv = 1.0 / std::sqrt(norm2);
  const int ex = nx + 2 * radius, ey = ny + 2 * radius;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> white(static_cast<std::size_t>(ex) * ey);
  for (double& w : white) w = normal(rng);

  ScalarGrid out(nx, ny);
  const int kw = 2 * radius + 1;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < kw; ++dy)
        for (int dx = 0; dx < kw; ++dx)
          acc += kernel[dy * kw + dx] * white[static_cast<std::size_t>(y + dy) * ex + (x + dx)];
      out.at(x, y) = acc * inv;
    }
  return out;
}

/// Snapshot t only depends on (cfg, t): each snapshot owns a counter-derived stream.
inline VelocityField synth_snapshot(const SynthConfig& cfg, const VelocityField& mean,
                                    const ScalarGrid& stdt, std::int64_t t) {
  VelocityField f = mean;
  if (cfg.fluct_scale == 0.0) return f;
  std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
  const auto& g = cfg.grid;
  for (int c = 0; c < 2; ++c) {
    const auto n = correlated_noise(g.nx, g.ny, cfg.corr_len, rng);
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) f.at(x, y, c) += cfg.fluct_scale * stdt.at(x, y) * n.at(x, y);
  }
  return f;
}

inline Realization synth_realization(const SynthConfig& cfg) {
  cfg.validate();
  const auto mean = synth_mean_field(cfg.direction, cfg.grid);
  const auto stdt = synth_std_template(cfg.direction, cfg.grid);
  Realization r;
  r.direction_deg = cfg.direction;
  r.run_index = cfg.run_index;
  r.snapshots.reserve(static_cast<std::size_t>(cfg.n_snapshots));
  for (int t = 0; t < cfg.n_snapshots; ++t) r.snapshots.push_back(synth_snapshot(cfg, mean, stdt, t));
  return r;
}

/// Seed convention for a synthetic dataset: one stream per (direction, run).
inline std::uint64_t synth_run_seed(std::uint64_t base, double direction, int run_index) {
  return mix_seed(base ^ (static_cast<std::uint64_t>(direction * 10.0) << 8), static_cast<std::uint64_t>(run_index));
}

}  // namespace rooftop
