#pragma once

// Evaluation metrics: geometric mean bias (MG), normalized mean square error
// (NMSE), factor-of-two fraction (FAC2) and windowed SSIM, each computed on
// the u- and v-planes separately and then averaged.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rooftop/errors.hpp"
#include "rooftop/field.hpp"

namespace rooftop {

inline constexpr double kFac2Tolerance = 0.005;
inline constexpr int kSsimWindow = 7;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

namespace detail {
inline void check_lengths(std::span<const double> o, std::span<const double> p) {
  if (o.size() != p.size()) throw DataError("observed/predicted length mismatch");
}
}  // namespace detail

/// exp(mean ln(O/P)) over points where O and P share a sign.
inline double mg(std::span<const double> observed, std::span<const double> predicted,
                 int* used_points = nullptr) {
  detail::check_lengths(observed, predicted);
  double acc = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] * predicted[i] > 0.0) {
      acc += std::log(observed[i] / predicted[i]);
      ++n;
    }
  }
  if (used_points) *used_points = n;
  if (n == 0) throw MetricUndefined("MG: no points where observation and prediction share a sign");
  return std::exp(acc / n);
}

/// mean((O-P)^2) / (mean(O) * mean(P)).
inline double nmse(std::span<const double> observed, std::span<const double> predicted) {
  detail::check_lengths(observed, predicted);
  if (observed.empty()) throw MetricUndefined("NMSE of empty vectors");
  double se = 0.0, so = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - predicted[i];
    se += d * d;
    so += observed[i];
    sp += predicted[i];
  }
  const double n = static_cast<double>(observed.size());
  const double denom = (so / n) * (sp / n);
  if (denom == 0.0) throw MetricUndefined("NMSE: product of means is zero");
  return (se / n) / denom;
}

/// Fraction of points with 0.5 <= P/O <= 2 (O != 0), or with both |O| and |P|
/// within the small-value tolerance W.
inline double fac2(std::span<const double> observed, std::span<const double> predicted,
                   double w = kFac2Tolerance) {
  detail::check_lengths(observed, predicted);
  if (observed.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double o = observed[i], p = predicted[i];
    bool ok = false;
    if (o != 0.0) {
      const double r = p / o;
      ok = r >= 0.5 && r <= 2.0;
    }
    if (!ok) ok = std::abs(o) <= w && std::abs(p) <= w;
    hits += ok ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(observed.size());
}

/// Normalized 1-D Gaussian weights for the SSIM window.
inline std::vector<double> ssim_window_1d(int size = kSsimWindow, double sigma = kSsimSigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  double sum = 0.0;
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Mean SSIM over all valid (fully inside) window positions. `data_range` is
/// L in C1 = (K1 L)^2, C2 = (K2 L)^2; a non-positive range falls back to 1.
/// Grids smaller than the window use the largest odd window that fits.
inline double ssim(const ScalarGrid& a, const ScalarGrid& b, double data_range) {
  if (a.nx != b.nx || a.ny != b.ny) throw DataError("SSIM inputs differ in shape");
  int win = std::min({kSsimWindow, a.nx, a.ny});
  if (win % 2 == 0) --win;
  const auto g = ssim_window_1d(win, kSsimSigma);
  const double L = data_range > 0.0 ? data_range : 1.0;
  const double c1 = (kSsimK1 * L) * (kSsimK1 * L);
  const double c2 = (kSsimK2 * L) * (kSsimK2 * L);
  double total = 0.0;
  int positions = 0;
  for (int y0 = 0; y0 + win <= a.ny; ++y0) {
    for (int x0 = 0; x0 + win <= a.nx; ++x0) {
      double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          const double wt = g[dy] * g[dx];
          const double va = a.at(x0 + dx, y0 + dy), vb = b.at(x0 + dx, y0 + dy);
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      const double va2 = saa - ma * ma, vb2 = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va2 + vb2 + c2));
      ++positions;
    }
  }
  return total / positions;
}

inline double data_range(const ScalarGrid& g) {
  const auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
  return *hi - *lo;
}

struct ComponentMetrics {
  double ssim = 0.0;
  std::optional<double> mg;
  std::optional<double> nmse;
  double fac2 = 0.0;
  int mg_points = 0;
};

struct MetricReport {
  ComponentMetrics u;
  ComponentMetrics v;
  double ssim = 0.0;
  std::optional<double> mg;
  std::optional<double> nmse;
  double fac2 = 0.0;
  int mg_points = 0;
};

inline void average_components(MetricReport& r) {
  r.ssim = 0.5 * (r.u.ssim + r.v.ssim);
  r.fac2 = 0.5 * (r.u.fac2 + r.v.fac2);
  r.mg = (r.u.mg && r.v.mg) ? std::optional(0.5 * (*r.u.mg + *r.v.mg)) : std::nullopt;
  r.nmse = (r.u.nmse && r.v.nmse) ? std::optional(0.5 * (*r.u.nmse + *r.v.nmse)) : std::nullopt;
  r.mg_points = r.u.mg_points + r.v.mg_points;
}

namespace detail {
inline ComponentMetrics pointwise_metrics(std::span<const double> o, std::span<const double> p, double w) {
  ComponentMetrics m;
  try {
    m.mg = rooftop::mg(o, p, &m.mg_points);
  } catch (const MetricUndefined&) {
  }
  try {
    m.nmse = rooftop::nmse(o, p);
  } catch (const MetricUndefined&) {
  }
  m.fac2 = rooftop::fac2(o, p, w);
  return m;
}
}  // namespace detail

/// Per-component evaluation of one field. `ranges` gives the SSIM data range
/// per component; when absent the range of the ground-truth plane is used.
inline MetricReport evaluate(const VelocityField& pred, const VelocityField& truth, double w = kFac2Tolerance,
                             std::optional<std::pair<double, double>> ranges = std::nullopt) {
  if (!(pred.grid() == truth.grid())) throw DataError("prediction and truth grids differ");
  MetricReport r;
  for (int c = 0; c < 2; ++c) {
    const auto tp = truth.plane(c), pp = pred.plane(c);
    auto m = detail::pointwise_metrics(tp.values, pp.values, w);
    const double L = ranges ? (c == 0 ? ranges->first : ranges->second) : data_range(tp);
    m.ssim = ssim(tp, pp, L);
    (c == 0 ? r.u : r.v) = m;
  }
  average_components(r);
  return r;
}

/// Aggregate over a group of fields: MG, NMSE and FAC2 pool every point of
/// every field; SSIM is the mean of the per-field SSIM values.
inline MetricReport evaluate_pooled(std::span<const VelocityField> preds, std::span<const VelocityField> truths,
                                    double w = kFac2Tolerance,
                                    std::optional<std::pair<double, double>> ranges = std::nullopt) {
  if (preds.size() != truths.size() || preds.empty()) throw DataError("pooled evaluation needs matching groups");
  MetricReport r;
  for (int c = 0; c < 2; ++c) {
    std::vector<double> o, p;
    double ssim_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto tp = truths[i].plane(c), pp = preds[i].plane(c);
      o.insert(o.end(), tp.values.begin(), tp.values.end());
      p.insert(p.end(), pp.values.begin(), pp.values.end());
      const double L = ranges ? (c == 0 ? ranges->first : ranges->second) : data_range(tp);
      ssim_sum += ssim(tp, pp, L);
    }
    auto m = detail::pointwise_metrics(o, p, w);
    m.ssim = ssim_sum / static_cast<double>(preds.size());
    (c == 0 ? r.u : r.v) = m;
  }
  average_components(r);
  return r;
}

/// Per-component data range (max - min) of the ground truth over a set.
inline std::pair<double, double> component_ranges(std::span<const VelocityField> truths) {
  double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
  for (const auto& f : truths)
    for (int y = 0; y < f.grid().ny; ++y)
      for (int x = 0; x < f.grid().nx; ++x)
        for (int c = 0; c < 2; ++c) {
          lo[c] = std::min(lo[c], f.at(x, y, c));
          hi[c] = std::max(hi[c], f.at(x, y, c));
        }
  return {hi[0] - lo[0], hi[1] - lo[1]};
}

struct SpatialFeatures {
  double boundary_center_diff = 0.0;
  double cv = 0.0;
  double spatial_gradient = 0.0;  // mean over cells
  ScalarGrid gradient_map;
};

inline constexpr int kCenterBlock = 5;

/// Spatial descriptors of the mean wind-speed map: |ring mean - centre-block
/// mean|, coefficient of variation, and mean central-difference gradient
/// magnitude (one-sided at the borders).
inline SpatialFeatures spatial_features(const ScalarGrid& ws) {
  SpatialFeatures f;
  const int nx = ws.nx, ny = ws.ny;
  double ring = 0.0;
  int ring_n = 0;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x)
      if (x == 0 || y == 0 || x == nx - 1 || y == ny - 1) {
        ring += ws.at(x, y);
        ++ring_n;
      }
  const int bx = std::min(kCenterBlock, nx), by = std::min(kCenterBlock, ny);
  const int x0 = (nx - bx) / 2, y0 = (ny - by) / 2;
  double center = 0.0;
  for (int y = y0; y < y0 + by; ++y)
    for (int x = x0; x < x0 + bx; ++x) center += ws.at(x, y);
  f.boundary_center_diff = std::abs(ring / ring_n - center / (bx * by));

  double mean = 0.0;
  for (double v : ws.values) mean += v;
  mean /= static_cast<double>(ws.values.size());
  double var = 0.0;
  for (double v : ws.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(ws.values.size());
  f.cv = mean != 0.0 ? std::sqrt(var) / std::abs(mean) : 0.0;

  f.gradient_map = ScalarGrid(nx, ny);
  double gsum = 0.0;
  auto diff = [](double lo, double hi, int span) { return (hi - lo) / span; };
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, nx - 1);
      const int yl = std::max(y - 1, 0), yr = std::min(y + 1, ny - 1);
      const double gx = diff(ws.at(xl, y), ws.at(xr, y), xr - xl);
      const double gy = diff(ws.at(x, yl), ws.at(x, yr), yr - yl);
      f.gradient_map.at(x, y) = std::hypot(gx, gy);
      gsum += f.gradient_map.at(x, y);
    }
  f.spatial_gradient = gsum / (nx * ny);
  return f;
}

inline SpatialFeatures spatial_features(const FieldStatistics& stats) { return spatial_features(stats.ws_mean); }

inline constexpr double kSpeedClassThreshold = 0.6;

struct SpeedClassCounts {
  long long high = 0;
  long long low = 0;
};

inline SpeedClassCounts speed_class_counts(std::span<const VelocityField> snapshots,
                                           double threshold = kSpeedClassThreshold) {
  SpeedClassCounts c;
  for (const auto& s : snapshots)
    for (double ws : wind_speed(s).values) (ws >= threshold ? c.high : c.low) += 1;
  return c;
}

}  // namespace rooftop
