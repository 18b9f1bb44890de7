#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rooftop/kriging.hpp"
#include "rooftop/placement.hpp"
#include "support.hpp"

using namespace rooftop;

namespace {

SensorLayout random_layout(std::mt19937_64& rng, int k) {
  std::vector<int> idx(225);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Cell> cells;
  for (int i = 0; i < k; ++i) cells.push_back({idx[i] % 15, idx[i] / 15});
  return {kReferenceGrid, cells};
}

std::vector<double> random_reading(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> r(2 * k);
  for (double& v : r) v = d(rng);
  return r;
}

// Zero-mean Gaussian process snapshots with covariance exp(-(h/len)^2),
// sampled through a symmetric square root of the covariance.
std::vector<VelocityField> gp_snapshots(double len, int n, std::uint64_t seed) {
  Eigen::MatrixXd cov(225, 225);
  for (int i = 0; i < 225; ++i)
    for (int j = 0; j < 225; ++j) {
      const double h = std::hypot(i % 15 - j % 15, i / 15 - j / 15);
      cov(i, j) = std::exp(-(h / len) * (h / len));
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<VelocityField> out;
  for (int t = 0; t < n; ++t) {
    VelocityField f(kReferenceGrid);
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd z(225);
      for (int i = 0; i < 225; ++i) z(i) = nd(rng);
      const Eigen::VectorXd x = root * z;
      for (int i = 0; i < 225; ++i) f.at(i % 15, i / 15, c) = x(i);
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST(Semivariance, Values) {
  const VariogramModel m{2.0};
  EXPECT_EQ(gaussian_semivariance(0.0, m), 0.0);
  EXPECT_NEAR(gaussian_semivariance(1e3, m), 1.0, 1e-15);
  EXPECT_NEAR(gaussian_semivariance(2.0, m), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(gaussian_semivariance(2.0, m), 0.6321205588, 1e-10);
}

TEST(Variogram, LengthBounds) {
  EXPECT_THROW(VariogramModel{0.4}.validate(), ConfigError);
  EXPECT_THROW(VariogramModel{10.5}.validate(), ConfigError);
  EXPECT_NO_THROW(VariogramModel{0.5}.validate());
}

TEST(KrigingSystem, SymmetricAugmentedMatrix) {
  const KrigingSystem s({{0, 0}, {3, 1}, {7, 9}}, VariogramModel{2.0});
  const auto& a = s.matrix();
  EXPECT_EQ(a.rows(), 4);
  EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(a(3, 3), 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a(i, 3), 1.0);
}

TEST(KrigingSystem, HandSolvedTwoSensorLine) {
  // Sensors at x=0 and x=2 on one row, target at x=3, length 1.
  const KrigingSystem s({{0, 0}, {2, 0}}, VariogramModel{1.0});
  const double a = 1.0 - std::exp(-4.0);  // gamma(2)
  const double b1 = 1.0 - std::exp(-9.0);  // gamma(3)
  const double b2 = 1.0 - std::exp(-1.0);  // gamma(1)
  // a*w2 + mu = b1, a*w1 + mu = b2, w1 + w2 = 1.
  const double w2 = 0.5 * (1.0 + (b1 - b2) / a);
  const double w1 = 1.0 - w2;
  const auto w = s.weights({3, 0});
  EXPECT_NEAR(w(0), w1, 1e-10);
  EXPECT_NEAR(w(1), w2, 1e-10);
  const SensorLayout l(kReferenceGrid, {{0, 0}, {2, 0}});
  const std::vector<double> reading = {1.5, -0.5, 0.0, 0.0};
  const auto f = reconstruct_kriging(l, reading, KrigingModel{VariogramModel{1.0}, VariogramModel{1.0}});
  EXPECT_NEAR(f.u(3, 0), 1.5 * w1 - 0.5 * w2, 1e-10);
}

TEST(Kriging, SingleSensorGivesConstantField) {
  const SensorLayout l(kReferenceGrid, {{4, 11}});
  const auto f = reconstruct_kriging(l, std::vector<double>{0.8, -0.3}, KrigingModel{});
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) {
      EXPECT_NEAR(f.u(x, y), 0.8, 1e-12);
      EXPECT_NEAR(f.v(x, y), -0.3, 1e-12);
    }
}

TEST(Kriging, ExactAtSensorsAndWeightsSumToOne) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> len(0.5, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 29);
    const auto l = random_layout(rng, k);
    const auto reading = random_reading(rng, k);
    const KrigingModel m{VariogramModel{len(rng)}, VariogramModel{len(rng)}};
    const KrigingReconstructor rec(l, m);
    const auto f = rec.reconstruct(reading);
    for (int i = 0; i < k; ++i) {
      const auto c = l.cells()[i];
      ASSERT_NEAR(f.u(c.x, c.y), reading[i], 1e-6);
      ASSERT_NEAR(f.v(c.x, c.y), reading[k + i], 1e-6);
    }
    if (trial % 10 == 0) {
      for (int comp = 0; comp < 2; ++comp) {
        const Eigen::VectorXd sums = rec.weights(comp).rowwise().sum();
        ASSERT_LT((sums.array() - 1.0).abs().maxCoeff(), 1e-8);
      }
    }
  }
}

TEST(Kriging, TranslationInvariance) {
  std::mt19937_64 rng(2);
  const auto l = random_layout(rng, 12);
  auto reading = random_reading(rng, 12);
  const KrigingModel m{VariogramModel{2.5}, VariogramModel{1.2}};
  const auto a = reconstruct_kriging(l, reading, m);
  for (double& v : reading) v += 3.0;
  const auto b = reconstruct_kriging(l, reading, m);
  for (std::size_t i = 0; i < a.raw().size(); ++i) EXPECT_NEAR(b.raw()[i], a.raw()[i] + 3.0, 1e-8);
}

TEST(Kriging, SensorOrderInvariance) {
  std::mt19937_64 rng(3);
  const auto l = random_layout(rng, 9);
  const auto reading = random_reading(rng, 9);
  std::vector<Cell> cells(l.cells().rbegin(), l.cells().rend());
  std::vector<double> rev(18);
  for (int i = 0; i < 9; ++i) {
    rev[i] = reading[8 - i];
    rev[9 + i] = reading[9 + 8 - i];
  }
  const KrigingModel m{VariogramModel{3.0}, VariogramModel{3.0}};
  const auto a = reconstruct_kriging(l, reading, m);
  const auto b = reconstruct_kriging(SensorLayout(kReferenceGrid, cells), rev, m);
  for (std::size_t i = 0; i < a.raw().size(); ++i) EXPECT_NEAR(a.raw()[i], b.raw()[i], 1e-9);
}

TEST(SelectLength, SearchGrid) {
  const auto g = length_search_grid();
  ASSERT_EQ(g.size(), 20u);
  EXPECT_NEAR(g.front(), 0.5, 1e-15);
  EXPECT_NEAR(g.back(), 10.0, 1e-12);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(20.0, 1.0 / 19.0), 1e-12);
}

TEST(SelectLength, ConstantReadingsTieToSmallest) {
  const auto l = uniform_layout(kReferenceGrid, 10, 0);
  VelocityField f(kReferenceGrid);
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) {
      f.at(x, y, 0) = 0.7;
      f.at(x, y, 1) = -0.2;
    }
  const std::vector<VelocityField> cal(5, f);
  const auto m = select_length(l, cal);
  EXPECT_DOUBLE_EQ(m[0].length, 0.5);
  EXPECT_DOUBLE_EQ(m[1].length, 0.5);
}

TEST(SelectLength, SinglePointSearch) {
  std::mt19937_64 rng(4);
  const auto l = random_layout(rng, 6);
  const std::vector<VelocityField> cal = {testing_support::random_field(rng)};
  const std::vector<double> grid = {4.2};
  EXPECT_DOUBLE_EQ(select_length(l, cal, grid)[0].length, 4.2);
}

TEST(SelectLength, NeedsThreeSensors) {
  const SensorLayout l(kReferenceGrid, {{0, 0}, {1, 1}});
  const std::vector<VelocityField> cal(2, VelocityField(kReferenceGrid));
  EXPECT_THROW(select_length(l, cal), ConfigError);
}

TEST(SelectLength, RecoversGaussianProcessLength) {
  const auto cal = gp_snapshots(3.0, 50, 5);
  const auto l = uniform_layout(kReferenceGrid, 30, 0);
  const auto m = select_length(l, cal);
  for (int c = 0; c < 2; ++c) {
    EXPECT_GE(m[c].length, 2.0) << c;
    EXPECT_LE(m[c].length, 5.0) << c;
  }
}
