#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "rooftop/nn/graph.hpp"
#include "rooftop/nn/train.hpp"
#include "grad_cases.hpp"

using namespace rooftop::nn;
using testing_support::GradCase;
using testing_support::gradient_error;
using testing_support::uniform;

namespace {

void expect_gradients(const GradCase& c, std::uint64_t seed, int instances = 20) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < instances; ++i) {
    const double err = gradient_error(c, rng);
    ASSERT_LT(err, 1e-3) << "instance " << i;
  }
}

}  // namespace

class GradCheck : public ::testing::TestWithParam<testing_support::NamedCase> {};

TEST_P(GradCheck, MatchesCentralDifferences) {
  const auto& p = GetParam();
  expect_gradients(p.c, p.seed);
}

INSTANTIATE_TEST_SUITE_P(Primitives, GradCheck, ::testing::ValuesIn(testing_support::primitive_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(Engine, DeltaKernelIsIdentity) {
  std::mt19937_64 rng(30);
  Graph<double> g(false);
  const auto xv = uniform(rng, 2 * 2 * 5 * 5);
  std::vector<double> w(2 * 2 * 9, 0.0);
  w[(0 * 2 + 0) * 9 + 4] = 1.0;
  w[(1 * 2 + 1) * 9 + 4] = 1.0;
  Var y = g.conv2d(g.input({2, 2, 5, 5}, xv), g.input({2, 2, 3, 3}, w), g.input({2}, {0.0, 0.0}), 1, 1);
  const auto out = g.value(y);
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_DOUBLE_EQ(out[i], xv[i]);
}

TEST(Engine, MaxPoolConstant) {
  Graph<double> g(false);
  Var y = g.maxpool2x2(g.input({1, 1, 16, 16}, std::vector<double>(256, 0.4)));
  EXPECT_EQ(g.shape(y), (Shape{1, 1, 8, 8}));
  for (double v : g.value(y)) EXPECT_EQ(v, 0.4);
}

TEST(Engine, PadThenCropIsIdentity) {
  std::mt19937_64 rng(31);
  Graph<double> g(false);
  const auto xv = uniform(rng, 2 * 15 * 15);
  Var p = g.pad_to(g.input({1, 2, 15, 15}, xv), 16, 16);
  EXPECT_EQ(g.shape(p), (Shape{1, 2, 16, 16}));
  Var c = g.crop_to(p, 15, 15);
  const auto out = g.value(c);
  EXPECT_TRUE(std::equal(out.begin(), out.end(), xv.begin()));
}

TEST(Engine, PatchifyIsLossless) {
  std::vector<double> xv(3 * 15 * 15);
  std::iota(xv.begin(), xv.end(), 0.0);
  Graph<double> g(false);
  Var t = g.patchify(g.input({1, 3, 15, 15}, xv), 3);
  EXPECT_EQ(g.shape(t), (Shape{1, 25, 27}));
  const auto tv = g.value(t);
  std::set<double> seen(tv.begin(), tv.end());
  EXPECT_EQ(seen.size(), xv.size());
  // Token p covers rows 3*(p/5).., columns 3*(p%5)..; feature (c, py, px).
  EXPECT_EQ(tv[7 * 27 + 1 * 9 + 2 * 3 + 1], 1 * 225.0 + (3 * 1 + 2) * 15 + (3 * 2 + 1));
}

TEST(Engine, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(32);
  Graph<double> g(false);
  Var y = g.softmax(g.input({4, 7}, uniform(rng, 28, -30, 30)));
  const auto v = g.value(y);
  for (int r = 0; r < 4; ++r) EXPECT_NEAR(std::accumulate(v.begin() + r * 7, v.begin() + r * 7 + 7, 0.0), 1.0, 1e-12);
}

TEST(Engine, ShapeMismatchThrows) {
  Graph<double> g(false);
  Var a = g.input({2, 2}, std::vector<double>(4, 1.0));
  Var b = g.input({4}, std::vector<double>(4, 1.0));
  EXPECT_THROW(g.add(a, b), rooftop::DataError);
  EXPECT_THROW(g.input({3}, std::vector<double>(2, 0.0)), rooftop::DataError);
}

TEST(Engine, FrozenParameterGetsNoGradient) {
  Parameter<double> w("w", {1, 2});
  w.value = {0.5, -0.5};
  Graph<double> g(true);
  Var x = g.input({1, 2}, {1.0, 2.0}, true);
  Var y = g.mean(g.dense(x, g.param(w, false), Var{}));
  g.backward(y);
  EXPECT_EQ(w.grad, (std::vector<double>{0.0, 0.0}));
  EXPECT_NEAR(g.grad(x)[0], 0.5, 1e-15);
}

TEST(Adam, HandComputedSteps) {
  Parameter<double> p("p", {1});
  p.value = {1.0};
  Adam<double> opt({&p}, 0.1);
  p.grad = {0.5};
  opt.step();
  // m = 0.05, v = 2.5e-4; bias-corrected 0.5 and 0.25.
  EXPECT_NEAR(p.value[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  p.grad = {-1.0};
  opt.step();
  const double m = 0.9 * 0.05 + 0.1 * -1.0, v = 0.999 * 2.5e-4 + 0.001 * 1.0;
  const double upd = 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  EXPECT_NEAR(p.value[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - upd, 1e-12);
  EXPECT_EQ(opt.steps(), 2);
  opt.zero_grad();
  EXPECT_EQ(p.grad[0], 0.0);
}
