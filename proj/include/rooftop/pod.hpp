#pragma once

// POD of mean-centered snapshot data and sensor ranking by QR with column
// pivoting on the transposed mode matrix.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rooftop/errors.hpp"
#include "rooftop/field.hpp"
#include "rooftop/placement.hpp"

namespace rooftop {

inline constexpr int kDefaultPodModes = 40;

struct PODBasis {
  GridSpec grid = kReferenceGrid;
  Eigen::VectorXd mean;                // length dof
  Eigen::MatrixXd modes;               // dof x r, orthonormal columns
  std::vector<double> singular_values;  // r leading values, nonincreasing
  std::vector<double> all_singular_values;
  double energy_captured = 0.0;
  int requested_modes = 0;
  bool truncated = false;  // true when r was shrunk to the numerical rank

  [[nodiscard]] int rank() const { return static_cast<int>(modes.cols()); }
};

/// Centers the N x dof snapshot matrix and keeps the leading r right singular
/// vectors. If r exceeds the numerical rank it is shrunk and `truncated` set;
/// a zero centered matrix is an error.
inline PODBasis compute_pod(std::span<const VelocityField> snapshots, int r) {
  if (r < 1) throw ConfigError("POD mode count must be >= 1");
  if (static_cast<int>(snapshots.size()) < r)
    throw ConfigError("POD needs at least r snapshots");
  const auto grid = snapshots.front().grid();
  const int n = static_cast<int>(snapshots.size());
  const int dof = grid.dof();

  Eigen::MatrixXd y(n, dof);
  for (int t = 0; t < n; ++t) {
    const auto v = vectorize(snapshots[t]);
    y.row(t) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), dof);
  }
  PODBasis b;
  b.grid = grid;
  b.requested_modes = r;
  b.mean = y.colwise().mean().transpose();
  // Centering leaves roundoff of order eps * |data|, so the rank cutoff is
  // relative to the uncentered Frobenius norm.
  const double data_norm = y.norm();
  y.rowwise() -= b.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double tol = std::max(n, dof) * std::numeric_limits<double>::epsilon() *
                     std::max(s.size() > 0 ? s(0) : 0.0, data_norm);
  int rank = 0;
  while (rank < s.size() && s(rank) > tol && s(rank) > 0.0) ++rank;
  if (rank == 0) throw NumericalError("rank-degenerate snapshot set: centered data matrix is zero");

  const int kept = std::min(r, rank);
  b.truncated = kept < r;
  b.modes = svd.matrixV().leftCols(kept);
  double total = 0.0, captured = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    b.all_singular_values.push_back(s(i));
    total += s(i) * s(i);
    if (i < kept) {
      b.singular_values.push_back(s(i));
      captured += s(i) * s(i);
    }
  }
  b.energy_captured = captured / total;
  return b;
}

struct SensorRanking {
  GridSpec grid = kReferenceGrid;
  std::vector<int> columns;  // permutation of 0..dof-1, most informative first
  std::vector<Cell> cells;   // distinct cells in first-occurrence order
};

/// Relative tolerance under which two pivot norms count as tied; ties go to
/// the lower original column index.
inline constexpr double kPivotTieTolerance = 1e-10;

/// Column order of QR with column pivoting on `a` (rows x cols). Residual
/// column norms are recomputed at every step rather than downdated, so the
/// tie rule sees the same quantities as a greedy Gram-Schmidt selection.
inline std::vector<int> pivoted_qr_order(Eigen::MatrixXd a) {
  const int rows = static_cast<int>(a.rows());
  const int cols = static_cast<int>(a.cols());
  std::vector<int> perm(static_cast<std::size_t>(cols));
  std::iota(perm.begin(), perm.end(), 0);
  const double scale = cols > 0 ? a.colwise().norm().maxCoeff() : 0.0;
  const double tie = kPivotTieTolerance * std::max(scale, std::numeric_limits<double>::min());

  const int steps = std::min(rows, cols);
  for (int j = 0; j < steps; ++j) {
    std::vector<double> norms(static_cast<std::size_t>(cols), 0.0);
    double best = 0.0;
    for (int c = j; c < cols; ++c) {
      norms[c] = a.col(c).tail(rows - j).norm();
      best = std::max(best, norms[c]);
    }
    int pivot = -1;
    for (int c = j; c < cols; ++c)
      if (norms[c] >= best - tie && (pivot < 0 || perm[c] < perm[pivot])) pivot = c;
    if (pivot != j) {
      a.col(j).swap(a.col(pivot));
      std::swap(perm[j], perm[pivot]);
    }
    // Householder reflector zeroing a(j+1:, j).
    Eigen::VectorXd x = a.col(j).tail(rows - j);
    const double alpha = x.norm();
    if (alpha == 0.0) continue;
    Eigen::VectorXd v = x;
    v(0) += (x(0) >= 0.0 ? alpha : -alpha);
    const double vnorm2 = v.squaredNorm();
    if (vnorm2 == 0.0) continue;
    auto block = a.bottomRightCorner(rows - j, cols - j);
    const Eigen::RowVectorXd w = (v.transpose() * block) * (2.0 / vnorm2);
    block.noalias() -= v * w;
  }
  // No rows remain: leftover residual norms are all zero and tie.
  std::sort(perm.begin() + steps, perm.end());
  return perm;
}

inline SensorRanking qr_rank_sensors(const PODBasis& basis) {
  SensorRanking out;
  out.grid = basis.grid;
  out.columns = pivoted_qr_order(basis.modes.transpose());
  const int cells = basis.grid.cells();
  std::vector<bool> seen(static_cast<std::size_t>(cells), false);
  for (int col : out.columns) {
    const int cell = col % cells;
    if (seen[cell]) continue;
    seen[cell] = true;
    out.cells.push_back({cell % basis.grid.nx, cell / basis.grid.nx});
  }
  return out;
}

inline SensorLayout layout_from_ranking(const SensorRanking& ranking, int k) {
  if (k < 1 || k > static_cast<int>(ranking.cells.size()))
    throw ConfigError("k=" + std::to_string(k) + " exceeds the ranked cell count " +
                      std::to_string(ranking.cells.size()));
  return {ranking.grid, std::vector<Cell>(ranking.cells.begin(), ranking.cells.begin() + k)};
}

}  // namespace rooftop
