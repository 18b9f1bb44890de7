#pragma once

// Ordinary Kriging per velocity component: Gaussian variogram with zero
// nugget and unit sill; the correlation length is chosen per component by
// leave-one-out cross-validation over a log-spaced grid.

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rooftop/errors.hpp"
#include "rooftop/field.hpp"
#include "rooftop/placement.hpp"

namespace rooftop {

inline constexpr double kMinCorrelationLength = 0.5;
inline constexpr double kMaxCorrelationLength = 10.0;
inline constexpr int kLengthGridPoints = 20;
inline constexpr int kCalibrationSnapshots = 100;

struct VariogramModel {
  double length = 1.0;
  double sill = 1.0;
  double nugget = 0.0;

  void validate() const {
    if (!(length >= kMinCorrelationLength && length <= kMaxCorrelationLength))
      throw ConfigError("variogram length outside [0.5, 10]");
  }
};

/// One variogram per velocity component (u, v).
using KrigingModel = std::array<VariogramModel, 2>;

inline double gaussian_semivariance(double h, const VariogramModel& m) {
  const double r = h / m.length;
  return m.nugget + (m.sill - m.nugget) * (1.0 - std::exp(-r * r));
}

inline double cell_distance(Cell a, Cell b) { return std::hypot(double(a.x - b.x), double(a.y - b.y)); }

/// Factored ordinary-Kriging system for a fixed sensor set and variogram.
/// Only right-hand sides change between target locations.
class KrigingSystem {
 public:
  KrigingSystem(std::vector<Cell> sensors, VariogramModel model)
      : sensors_(std::move(sensors)), model_(model) {
    const int k = static_cast<int>(sensors_.size());
    if (k < 1) throw ConfigError("Kriging needs at least one sensor");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j)
        a(i, j) = gaussian_semivariance(cell_distance(sensors_[i], sensors_[j]), model_);
      a(i, k) = 1.0;
      a(k, i) = 1.0;
    }
    matrix_ = a;
    lu_.compute(a);
    if (!lu_.isInvertible())
      throw NumericalError("singular Kriging system (k=" + std::to_string(k) +
                           ", length=" + std::to_string(model_.length) + ")");
  }

  [[nodiscard]] int k() const { return static_cast<int>(sensors_.size()); }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return matrix_; }
  [[nodiscard]] const VariogramModel& model() const { return model_; }

  /// Weights for one target; a target on a sensor gets the unit weight of
  /// that sensor, which is the exact solution under a zero nugget.
  [[nodiscard]] Eigen::VectorXd weights(Cell target) const {
    const int k = this->k();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < k; ++i)
      if (sensors_[i] == target) {
        w(i) = 1.0;
        return w;
      }
    Eigen::VectorXd rhs(k + 1);
    for (int i = 0; i < k; ++i) rhs(i) = gaussian_semivariance(cell_distance(sensors_[i], target), model_);
    rhs(k) = 1.0;
    Eigen::VectorXd sol = lu_.solve(rhs);
    // One step of iterative refinement.
    sol += lu_.solve(rhs - matrix_ * sol);
    if (!sol.allFinite()) throw NumericalError("non-finite Kriging weights");
    return sol.head(k);
  }

  /// Weight matrix for all grid cells, row = y * nx + x.
  [[nodiscard]] Eigen::MatrixXd grid_weights(GridSpec g) const {
    Eigen::MatrixXd w(g.cells(), k());
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) w.row(y * g.nx + x) = weights({x, y}).transpose();
    return w;
  }

 private:
  std::vector<Cell> sensors_;
  VariogramModel model_;
  Eigen::MatrixXd matrix_;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

/// Linear field reconstructor: per component, predictions = W_c * readings_c.
class KrigingReconstructor {
 public:
  KrigingReconstructor(const SensorLayout& layout, const KrigingModel& model) : grid_(layout.grid()) {
    for (int c = 0; c < 2; ++c) {
      if (c == 1 && model[1].length == model[0].length) {
        weights_[1] = weights_[0];
        break;
      }
      weights_[c] = KrigingSystem(layout.cells(), model[c]).grid_weights(grid_);
    }
  }

  [[nodiscard]] const Eigen::MatrixXd& weights(int component) const { return weights_[component]; }

  /// `reading` holds k u-values followed by k v-values.
  [[nodiscard]] VelocityField reconstruct(std::span<const double> reading) const {
    const auto k = static_cast<Eigen::Index>(weights_[0].cols());
    if (static_cast<Eigen::Index>(reading.size()) != 2 * k) throw DataError("reading length must be 2k");
    VelocityField f(grid_);
    for (int c = 0; c < 2; ++c) {
      const Eigen::Map<const Eigen::VectorXd> z(reading.data() + c * k, k);
      if (!z.allFinite()) throw DataError("non-finite sensor reading");
      const Eigen::VectorXd pred = weights_[c] * z;
      for (int y = 0; y < grid_.ny; ++y)
        for (int x = 0; x < grid_.nx; ++x) f.at(x, y, c) = pred(y * grid_.nx + x);
    }
    return f;
  }

 private:
  GridSpec grid_;
  std::array<Eigen::MatrixXd, 2> weights_;
};

inline VelocityField reconstruct_kriging(const SensorLayout& layout, std::span<const double> reading,
                                         const KrigingModel& model) {
  return KrigingReconstructor(layout, model).reconstruct(reading);
}

/// 20 log-spaced lengths spanning [0.5, 10].
inline std::vector<double> length_search_grid(int points = kLengthGridPoints) {
  std::vector<double> g;
  if (points == 1) return {kMinCorrelationLength};
  const double lo = std::log(kMinCorrelationLength), hi = std::log(kMaxCorrelationLength);
  for (int i = 0; i < points; ++i) g.push_back(std::exp(lo + (hi - lo) * i / (points - 1)));
  return g;
}

/// Mean leave-one-out squared error of ordinary Kriging at held-out sensors.
/// `values` is snapshots x k for one component. Returns +inf if any
/// leave-one-out system is singular.
inline double loo_score(const std::vector<Cell>& sensors, const Eigen::MatrixXd& values, double length) {
  const int k = static_cast<int>(sensors.size());
  double sse = 0.0;
  for (int i = 0; i < k; ++i) {
    std::vector<Cell> rest;
    std::vector<int> idx;
    for (int j = 0; j < k; ++j)
      if (j != i) {
        rest.push_back(sensors[j]);
        idx.push_back(j);
      }
    Eigen::VectorXd w;
    try {
      w = KrigingSystem(rest, VariogramModel{length}).weights(sensors[i]);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
    for (Eigen::Index t = 0; t < values.rows(); ++t) {
      double pred = 0.0;
      for (int j = 0; j < k - 1; ++j) pred += w(j) * values(t, idx[j]);
      const double e = pred - values(t, i);
      sse += e * e;
    }
  }
  return sse / (static_cast<double>(k) * static_cast<double>(values.rows()));
}

/// Grid search of the correlation length for one component (ties to the
/// smaller length).
inline VariogramModel select_length_component(const std::vector<Cell>& sensors, const Eigen::MatrixXd& values,
                                              std::span<const double> grid) {
  if (sensors.size() < 3) throw ConfigError("length selection needs k >= 3");
  // Scores closer than roundoff of the reading magnitude count as tied.
  const double tie = 1e-12 * (values.size() > 0 ? values.squaredNorm() / static_cast<double>(values.size()) : 0.0);
  double best = std::numeric_limits<double>::infinity();
  double best_len = grid.front();
  for (double len : grid) {
    const double s = loo_score(sensors, values, len);
    if (s < best - tie) {
      best = s;
      best_len = len;
    }
  }
  return VariogramModel{best_len};
}

/// Selects one length per component from calibration snapshots.
inline KrigingModel select_length(const SensorLayout& layout, std::span<const VelocityField> calibration,
                                  std::span<const double> grid) {
  if (layout.k() < 3) throw ConfigError("length selection needs k >= 3");
  if (calibration.empty()) throw ConfigError("empty calibration set");
  KrigingModel m;
  const int k = layout.k();
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd vals(static_cast<Eigen::Index>(calibration.size()), k);
    for (std::size_t t = 0; t < calibration.size(); ++t)
      for (int i = 0; i < k; ++i) vals(static_cast<Eigen::Index>(t), i) =
          calibration[t].at(layout.cells()[i].x, layout.cells()[i].y, c);
    m[c] = select_length_component(layout.cells(), vals, grid);
  }
  return m;
}

inline KrigingModel select_length(const SensorLayout& layout, std::span<const VelocityField> calibration) {
  const auto g = length_search_grid();
  return select_length(layout, calibration, g);
}

}  // namespace rooftop
