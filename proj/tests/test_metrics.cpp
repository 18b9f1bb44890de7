#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rooftop/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace rooftop;
using namespace testing_support;


TEST(Mg, Identity) {
  const Vec o = {0.3, -0.2, 1.5};
  EXPECT_DOUBLE_EQ(mg(o, o), 1.0);
}

TEST(Mg, HandValues) {
  EXPECT_NEAR(mg(Vec{2, 2}, Vec{1, 1}), 2.0, 1e-15);
  int used = 0;
  EXPECT_NEAR(mg(Vec{1, -1}, Vec{1, 1}, &used), 1.0, 1e-15);
  EXPECT_EQ(used, 1);
}

TEST(Mg, EmptyFilteredSetIsUndefined) {
  EXPECT_THROW(mg(Vec{1, -1}, Vec{-1, 1}), MetricUndefined);
  EXPECT_THROW(mg(Vec{0.0}, Vec{1.0}), MetricUndefined);
}

TEST(Mg, ScaleProperty) {
  std::mt19937_64 rng(2);
  const auto o = random_vec(rng, 50, 0.1, 2.0);
  Vec co(o);
  for (double& v : co) v *= 1.7;
  EXPECT_NEAR(mg(co, o), 1.7, 1e-12);
}

TEST(Nmse, HandValues) {
  EXPECT_EQ(nmse(Vec{1, 2}, Vec{1, 2}), 0.0);
  EXPECT_NEAR(nmse(Vec{1, 1}, Vec{2, 2}), 0.5, 1e-15);
  EXPECT_THROW(nmse(Vec{1, -1}, Vec{1, 2}), MetricUndefined);
}

TEST(Nmse, HalvedMeansInflateFourfold) {
  // Same absolute errors, both means halved: denominator shrinks by 4.
  const Vec o = {2, 2, 2, 2}, p = {2.5, 1.5, 2.5, 1.5};
  const Vec o2 = {1, 1, 1, 1}, p2 = {1.5, 0.5, 1.5, 0.5};
  EXPECT_NEAR(nmse(o2, p2), 4.0 * nmse(o, p), 1e-12);
}

TEST(Nmse, ScaleInvariant) {
  std::mt19937_64 rng(3);
  const auto o = random_vec(rng, 40, 0.1, 1.0), p = random_vec(rng, 40, 0.1, 1.0);
  Vec co(o), cp(p);
  for (double& v : co) v *= 3.3;
  for (double& v : cp) v *= 3.3;
  EXPECT_NEAR(nmse(co, cp), nmse(o, p), 1e-12);
}

TEST(Fac2, HandValues) {
  EXPECT_DOUBLE_EQ(fac2(Vec{0.5, -1}, Vec{0.5, -1}), 1.0);
  EXPECT_DOUBLE_EQ(fac2(Vec{0.003}, Vec{0.004}, 0.005), 1.0);
  EXPECT_DOUBLE_EQ(fac2(Vec{1}, Vec{3}), 0.0);
  EXPECT_DOUBLE_EQ(fac2(Vec{0.0}, Vec{0.001}), 1.0);
  EXPECT_DOUBLE_EQ(fac2(Vec{0.0}, Vec{0.01}), 0.0);
  EXPECT_DOUBLE_EQ(fac2(Vec{1, 1}, Vec{0.5, 2.0}), 1.0);
}

TEST(Fac2, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(4);
  auto o = random_vec(rng, 60, -1, 1), p = random_vec(rng, 60, -1, 1);
  const double f = fac2(o, p);
  EXPECT_GE(f, 0.0);
  EXPECT_LE(f, 1.0);
  std::vector<std::size_t> idx(o.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Vec o2, p2;
  for (auto i : idx) {
    o2.push_back(o[i]);
    p2.push_back(p[i]);
  }
  EXPECT_DOUBLE_EQ(fac2(o2, p2), f);
}

TEST(PointMetrics, MatchNaiveOracleOnRandomPairs) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const auto o = random_vec(rng, n, -1.0, 1.5), p = random_vec(rng, n, -1.0, 1.5);
    EXPECT_NEAR(fac2(o, p, 0.05), naive_fac2(o, p, 0.05), 1e-15);
    bool any_same_sign = false;
    for (std::size_t i = 0; i < n; ++i) any_same_sign = any_same_sign || o[i] * p[i] > 0;
    if (any_same_sign) {
      EXPECT_NEAR(mg(o, p) / naive_mg(o, p), 1.0, 1e-10);
    }
    const double mo = std::accumulate(o.begin(), o.end(), 0.0), mp = std::accumulate(p.begin(), p.end(), 0.0);
    if (std::abs(mo * mp) > 1e-6) {
      const double ref = naive_nmse(o, p);
      EXPECT_NEAR(nmse(o, p), ref, 1e-9 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(Ssim, IdenticalIsOne) {
  std::mt19937_64 rng(6);
  const auto a = random_grid(rng);
  EXPECT_NEAR(ssim(a, a, 2.0), 1.0, 1e-12);
}

TEST(Ssim, ShiftPenalized) {
  std::mt19937_64 rng(7);
  const auto a = random_grid(rng);
  auto b = a;
  for (double& v : b.values) v += 5.0;
  EXPECT_LT(ssim(a, b, 2.0), 1.0);
}

TEST(Ssim, SymmetricAndMatchesNaiveOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_grid(rng), b = random_grid(rng);
    const double L = 0.5 + (rng() % 100) / 50.0;
    const double s = ssim(a, b, L);
    EXPECT_NEAR(s, ssim(b, a, L), 1e-12);
    EXPECT_NEAR(s, naive_ssim(a, b, L), 1e-8);
  }
}

TEST(Ssim, DifferenceInOneWindowDropsBelowOne) {
  std::mt19937_64 rng(9);
  const auto a = random_grid(rng);
  auto b = a;
  b.at(14, 14) += 0.3;
  EXPECT_LT(ssim(a, b, 2.0), 1.0 - 1e-12);
}

TEST(Ssim, ZeroRangeFallsBackToUnit) {
  ScalarGrid a(15, 15, 0.2);
  EXPECT_NEAR(ssim(a, a, 0.0), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(ssim(a, a, 0.0), ssim(a, a, 1.0));
}

TEST(Evaluate, PerfectPrediction) {
  std::mt19937_64 rng(10);
  const auto f = random_field(rng, 0.1, 1.0);
  const auto r = evaluate(f, f);
  EXPECT_NEAR(r.ssim, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(*r.mg, 1.0);
  EXPECT_DOUBLE_EQ(*r.nmse, 0.0);
  EXPECT_DOUBLE_EQ(r.fac2, 1.0);
  EXPECT_EQ(r.mg_points, 450);
}

TEST(Evaluate, AveragesComponents) {
  VelocityField truth(kReferenceGrid), pred(kReferenceGrid);
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) {
      truth.at(x, y, 0) = pred.at(x, y, 0) = 1.0;
      truth.at(x, y, 1) = 1.0;
      pred.at(x, y, 1) = ((y * 15 + x) % 2 == 0) ? 1.0 : 5.0;
    }
  // 113 of 225 v-points match.
  const auto r = evaluate(pred, truth);
  EXPECT_DOUBLE_EQ(r.u.fac2, 1.0);
  EXPECT_DOUBLE_EQ(r.v.fac2, 113.0 / 225.0);
  EXPECT_DOUBLE_EQ(r.fac2, 0.5 * (1.0 + 113.0 / 225.0));
}

TEST(Evaluate, ManualComposition) {
  std::mt19937_64 rng(11);
  const auto truth = random_field(rng), pred = random_field(rng);
  const auto r = evaluate(pred, truth, 0.01);
  double s = 0, f = 0, m = 0, n = 0;
  for (int c = 0; c < 2; ++c) {
    const auto t = truth.plane(c), p = pred.plane(c);
    s += naive_ssim(t, p, data_range(t));
    f += naive_fac2(t.values, p.values, 0.01);
    m += naive_mg(t.values, p.values);
    n += naive_nmse(t.values, p.values);
  }
  EXPECT_NEAR(r.ssim, s / 2, 1e-8);
  EXPECT_NEAR(r.fac2, f / 2, 1e-15);
  EXPECT_NEAR(*r.mg, m / 2, 1e-10);
  EXPECT_NEAR(*r.nmse, n / 2, 1e-8 * std::abs(n));
}

TEST(EvaluatePooled, PoolsPointsAndAveragesSsim) {
  std::mt19937_64 rng(12);
  std::vector<VelocityField> t, p;
  for (int i = 0; i < 3; ++i) {
    t.push_back(random_field(rng, 0.1, 1.0));
    p.push_back(random_field(rng, 0.1, 1.0));
  }
  const auto r = evaluate_pooled(p, t, 0.005, std::pair{0.9, 0.9});
  Vec o, q;
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto tv = t[i].plane(0), pv = p[i].plane(0);
    o.insert(o.end(), tv.values.begin(), tv.values.end());
    q.insert(q.end(), pv.values.begin(), pv.values.end());
    s += ssim(tv, pv, 0.9);
  }
  EXPECT_NEAR(*r.u.nmse, naive_nmse(o, q), 1e-12);
  EXPECT_NEAR(r.u.ssim, s / 3, 1e-12);
  EXPECT_EQ(r.u.mg_points, 675);
}

TEST(ComponentRanges, MaxMinusMin) {
  VelocityField a(kReferenceGrid), b(kReferenceGrid);
  a.at(0, 0, 0) = -1.0;
  b.at(3, 3, 0) = 2.0;
  b.at(1, 1, 1) = 0.5;
  const std::vector<VelocityField> fs = {a, b};
  const auto [ru, rv] = component_ranges(fs);
  EXPECT_DOUBLE_EQ(ru, 3.0);
  EXPECT_DOUBLE_EQ(rv, 0.5);
}

TEST(SpatialFeatures, UniformIsZero) {
  const auto f = spatial_features(ScalarGrid(15, 15, 0.7));
  EXPECT_NEAR(f.boundary_center_diff, 0.0, 1e-15);
  EXPECT_NEAR(f.cv, 0.0, 1e-15);
  EXPECT_NEAR(f.spatial_gradient, 0.0, 1e-15);
}

TEST(SpatialFeatures, RampGradient) {
  ScalarGrid g(15, 15);
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) g.at(x, y) = x / 14.0;
  const auto f = spatial_features(g);
  EXPECT_NEAR(f.spatial_gradient, 1.0 / 14.0, 1e-12);
  for (double v : f.gradient_map.values) EXPECT_NEAR(v, 1.0 / 14.0, 1e-12);
}

TEST(SpatialFeatures, CheckerboardCv) {
  ScalarGrid g(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) g.at(x, y) = (x + y) % 2;
  EXPECT_NEAR(spatial_features(g).cv, 1.0, 1e-12);
}

TEST(SpatialFeatures, RingVersusCenter) {
  ScalarGrid g(15, 15, 1.0);
  for (int y = 5; y < 10; ++y)
    for (int x = 5; x < 10; ++x) g.at(x, y) = 0.25;
  EXPECT_NEAR(spatial_features(g).boundary_center_diff, 0.75, 1e-12);
}

TEST(SpeedClasses, Trivial) {
  const std::vector<VelocityField> zeros(4, VelocityField(kReferenceGrid));
  auto c = speed_class_counts(zeros);
  EXPECT_EQ(c.high, 0);
  EXPECT_EQ(c.low, 4 * 225);
  c = speed_class_counts(zeros, 0.0);
  EXPECT_EQ(c.high, 4 * 225);
  EXPECT_EQ(c.low, 0);
}

TEST(SpeedClasses, MatchesNaiveLoop) {
  std::mt19937_64 rng(13);
  std::vector<VelocityField> fs;
  for (int i = 0; i < 6; ++i) fs.push_back(random_field(rng));
  long long high = 0;
  for (const auto& f : fs)
    for (int y = 0; y < 15; ++y)
      for (int x = 0; x < 15; ++x) high += std::sqrt(f.u(x, y) * f.u(x, y) + f.v(x, y) * f.v(x, y)) >= 0.6;
  const auto c = speed_class_counts(fs);
  EXPECT_EQ(c.high, high);
  EXPECT_EQ(c.low, 6 * 225 - high);
}
