#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rooftop/field.hpp"

namespace testing_support {

using rooftop::ScalarGrid;
using Vec = std::vector<double>;

// Greedy selection: take the column with the largest residual norm (ties
// within a relative 1e-10 go to the lower index), then project it out of the
// remaining columns.
inline std::vector<int> greedy_order(const Eigen::MatrixXd& a) {
  const int cols = static_cast<int>(a.cols());
  Eigen::MatrixXd r = a;
  const double tie = 1e-10 * a.colwise().norm().maxCoeff();
  std::vector<int> order;
  std::vector<bool> taken(cols, false);
  for (int step = 0; step < cols; ++step) {
    double best = -1.0;
    for (int c = 0; c < cols; ++c)
      if (!taken[c]) best = std::max(best, r.col(c).norm());
    int pick = -1;
    for (int c = 0; c < cols; ++c)
      if (!taken[c] && r.col(c).norm() >= best - tie) {
        pick = c;
        break;
      }
    taken[pick] = true;
    order.push_back(pick);
    const double n = r.col(pick).norm();
    if (n <= tie) continue;
    const Eigen::VectorXd q = r.col(pick) / n;
    for (int c = 0; c < cols; ++c)
      if (!taken[c]) r.col(c) -= q * q.dot(r.col(c));
  }
  return order;
}

inline ScalarGrid random_grid(std::mt19937_64& rng, int nx = 15, int ny = 15) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  ScalarGrid g(nx, ny);
  for (double& v : g.values) v = d(rng);
  return g;
}

// Straightforward windowed SSIM: 2-D Gaussian weights built directly,
// centered second moments.
inline double naive_ssim(const ScalarGrid& a, const ScalarGrid& b, double L) {
  const int win = 7;
  double w[7][7], sum = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      w[i][j] = std::exp(-((i - 3.0) * (i - 3.0) + (j - 3.0) * (j - 3.0)) / (2.0 * 1.5 * 1.5));
      sum += w[i][j];
    }
  const double c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double total = 0.0;
  int n = 0;
  for (int y0 = 0; y0 + win <= a.ny; ++y0)
    for (int x0 = 0; x0 + win <= a.nx; ++x0) {
      double ma = 0.0, mb = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          ma += w[i][j] / sum * a.at(x0 + j, y0 + i);
          mb += w[i][j] / sum * b.at(x0 + j, y0 + i);
        }
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double da = a.at(x0 + j, y0 + i) - ma, db = b.at(x0 + j, y0 + i) - mb;
          va += w[i][j] / sum * da * da;
          vb += w[i][j] / sum * db * db;
          cov += w[i][j] / sum * da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  return total / n;
}

inline double naive_mg(const Vec& o, const Vec& p) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < o.size(); ++i)
    if ((o[i] > 0 && p[i] > 0) || (o[i] < 0 && p[i] < 0)) {
      s += std::log(std::fabs(o[i])) - std::log(std::fabs(p[i]));
      ++n;
    }
  return std::exp(s / n);
}

inline double naive_nmse(const Vec& o, const Vec& p) {
  const double mo = std::accumulate(o.begin(), o.end(), 0.0) / o.size();
  const double mp = std::accumulate(p.begin(), p.end(), 0.0) / p.size();
  double se = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) se += (o[i] - p[i]) * (o[i] - p[i]);
  return se / o.size() / (mo * mp);
}

inline double naive_fac2(const Vec& o, const Vec& p, double w) {
  int hits = 0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    const bool small = std::fabs(o[i]) <= w && std::fabs(p[i]) <= w;
    const bool ratio = o[i] != 0.0 && p[i] / o[i] >= 0.5 && p[i] / o[i] <= 2.0;
    hits += (small || ratio) ? 1 : 0;
  }
  return static_cast<double>(hits) / o.size();
}

inline Vec random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace testing_support
