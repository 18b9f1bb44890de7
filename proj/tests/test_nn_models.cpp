#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "rooftop/nn/checkpoint.hpp"
#include "rooftop/nn/data.hpp"
#include "rooftop/nn/models.hpp"
#include "rooftop/nn/train.hpp"
#include "rooftop/placement.hpp"
#include "support.hpp"

using namespace rooftop;
using namespace rooftop::nn;
using testing_support::GradCase;
using testing_support::gradient_error;
using testing_support::uniform;

namespace {

std::vector<double> flat_params(Model<double>& m) {
  std::vector<double> out;
  for (auto* p : m.params()) out.insert(out.end(), p->value.begin(), p->value.end());
  for (auto* p : m.critic_params()) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

Shape output_shape(Model<double>& m, int n) {
  std::mt19937_64 rng(n);
  Graph<double> g(false);
  Var x = g.input({n, 3, 15, 15}, uniform(rng, static_cast<std::size_t>(n) * 675));
  std::optional<Var> z;
  if (m.spec().noise_channels) z = g.input({n, 1, 15, 15}, uniform(rng, static_cast<std::size_t>(n) * 225));
  return g.shape(m.forward(g, x, z));
}

}  // namespace

TEST(ParamCount, UnetNearReference) {
  Model<float> m(unet_spec(), 1);
  EXPECT_EQ(m.param_count(), analytic_param_count(unet_spec()));
  EXPECT_NEAR(static_cast<double>(m.param_count()), 471586.0, 0.10 * 471586.0);
}

TEST(ParamCount, VitaeNearReference) {
  Model<float> m(vitae_spec(), 1);
  EXPECT_EQ(m.param_count(), analytic_param_count(vitae_spec()));
  EXPECT_NEAR(static_cast<double>(m.param_count()), 467491.0, 0.10 * 467491.0);
}

TEST(ParamCount, CwganNearReferenceAndRatio) {
  Model<float> g(cwgan_spec(), 1);
  Model<float> u(unet_spec(), 1);
  EXPECT_EQ(g.param_count(), analytic_param_count(cwgan_spec()));
  EXPECT_NEAR(static_cast<double>(g.param_count()), 8770000.0, 0.15 * 8770000.0);
  EXPECT_LT(static_cast<double>(u.param_count()), 0.06 * static_cast<double>(g.param_count()));
}

TEST(ParamCount, NarrowedSpecsMatchAnalytic) {
  for (Arch a : {Arch::Unet, Arch::Cwgan, Arch::Vitae})
    for (int d : {2, 4, 8}) {
      const auto s = narrowed(default_spec(a), d);
      Model<float> m(s, 3);
      EXPECT_EQ(m.param_count(), analytic_param_count(s)) << to_string(a) << "/" << d;
    }
}

TEST(ArchitectureSpec, Constants) {
  EXPECT_EQ(unet_spec().encoder_widths, (std::vector<int>{32, 64}));
  EXPECT_EQ(unet_spec().bottleneck_width, 128);
  EXPECT_EQ(cwgan_spec().encoder_widths, (std::vector<int>{64, 128, 256}));
  EXPECT_EQ(cwgan_spec().critic_widths, (std::vector<int>{64, 128, 256, 512}));
  const auto v = vitae_spec();
  EXPECT_EQ((v.height / v.patch) * (v.width / v.patch), 25);
  EXPECT_EQ(v.embed, 64);
  EXPECT_EQ(v.depth, 8);
  EXPECT_EQ(v.heads, 8);
  EXPECT_EQ(v.mlp_hidden(), 256);
  EXPECT_EQ(parse_arch("vitae"), Arch::Vitae);
  EXPECT_THROW(parse_arch("resnet"), ConfigError);
}

TEST(ArchitectureSpec, NarrowedHeadsDivideEmbedding) {
  const auto s = narrowed(vitae_spec(), 3);
  EXPECT_EQ(s.embed, 21);
  EXPECT_EQ(s.embed % s.heads, 0);
  EXPECT_NO_THROW(s.validate());
}

TEST(BuildModel, DeterministicPerSeed) {
  for (Arch a : {Arch::Unet, Arch::Cwgan, Arch::Vitae}) {
    const auto s = narrowed(default_spec(a), 4);
    Model<double> m1(s, 17), m2(s, 17), m3(s, 18);
    EXPECT_EQ(flat_params(m1), flat_params(m2));
    EXPECT_NE(flat_params(m1), flat_params(m3));
  }
}

TEST(BuildModel, InitializationConventions) {
  Model<double> m(vitae_spec(), 5);
  for (auto* p : m.params()) {
    const auto& n = p->name;
    if (n.ends_with(".gamma")) {
      for (double v : p->value) ASSERT_EQ(v, 1.0) << n;
    } else if (n.ends_with(".b") || n.ends_with(".beta")) {
      for (double v : p->value) ASSERT_EQ(v, 0.0) << n;
    } else if (n == "pos_embed") {
      // Token 0 sits at the origin: sin terms 0, cos terms 1.
      for (int j = 0; j < 64; ++j) ASSERT_NEAR(p->value[j], j % 2 ? 1.0 : 0.0, 1e-15);
      // Token 7 is at grid row 1, column 2; first feature is sin(row).
      ASSERT_NEAR(p->value[7 * 64], std::sin(1.0), 1e-12);
      ASSERT_NEAR(p->value[7 * 64 + 32], std::sin(2.0), 1e-12);
    } else {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < p->shape.size(); ++i) fan_in *= p->shape[i];
      const double limit = std::sqrt(6.0 / fan_in);
      for (double v : p->value) ASSERT_LE(std::abs(v), limit) << n;
    }
  }
}

TEST(BuildModel, OutputIsFifteenByFifteenByTwo) {
  for (Arch a : {Arch::Unet, Arch::Cwgan, Arch::Vitae}) {
    Model<double> m(narrowed(default_spec(a), 4), 1);
    for (int n : {1, 3}) EXPECT_EQ(output_shape(m, n), (Shape{n, 2, 15, 15})) << to_string(a);
  }
}

TEST(BuildModel, GeneratorRequiresNoise) {
  Model<double> m(narrowed(cwgan_spec(), 8), 1);
  Graph<double> g(false);
  Var x = g.input({1, 3, 15, 15}, std::vector<double>(675, 0.0));
  EXPECT_THROW(m.forward(g, x), ConfigError);
}

TEST(BuildModel, CriticScoresOnePerSample) {
  Model<double> m(narrowed(cwgan_spec(), 8), 1);
  Graph<double> g(false);
  Var c = g.input({3, 3, 15, 15}, std::vector<double>(3 * 675, 0.1));
  Var f = g.input({3, 2, 15, 15}, std::vector<double>(3 * 450, 0.2));
  EXPECT_EQ(g.shape(m.critic(g, c, f, false)), (Shape{3, 1}));
}

TEST(EndToEndGradient, Unet) {
  auto m = std::make_shared<Model<double>>(narrowed(unet_spec(), 8), 2);
  GradCase c{{{1, 3, 15, 15}}, [m](auto& g, const auto& v) { return m->forward(g, v[0]); }};
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) ASSERT_LT(gradient_error(c, rng, 20), 1e-3) << i;
}

TEST(EndToEndGradient, CwganGenerator) {
  auto m = std::make_shared<Model<double>>(narrowed(cwgan_spec(), 16), 3);
  GradCase c{{{1, 3, 15, 15}, {1, 1, 15, 15}}, [m](auto& g, const auto& v) { return m->forward(g, v[0], v[1]); }};
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) ASSERT_LT(gradient_error(c, rng, 20), 1e-3) << i;
}

TEST(EndToEndGradient, CwganCritic) {
  auto m = std::make_shared<Model<double>>(narrowed(cwgan_spec(), 16), 4);
  GradCase c{{{2, 3, 15, 15}, {2, 2, 15, 15}},
             [m](auto& g, const auto& v) { return m->critic(g, v[0], v[1], true); }};
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) ASSERT_LT(gradient_error(c, rng, 20), 1e-3) << i;
}

TEST(EndToEndGradient, Vitae) {
  auto m = std::make_shared<Model<double>>(narrowed(vitae_spec(), 4), 5);
  GradCase c{{{1, 3, 15, 15}}, [m](auto& g, const auto& v) { return m->forward(g, v[0]); }};
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) ASSERT_LT(gradient_error(c, rng, 20), 1e-3) << i;
}

TEST(EncodeInput, Saturation) {
  std::mt19937_64 rng(6);
  const auto f = testing_support::random_field(rng);
  std::vector<Cell> all;
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) all.push_back({x, y});
  const auto in = encode_input(SensorLayout(kReferenceGrid, all), f);
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) {
      EXPECT_EQ(in.at(0, x, y), f.u(x, y));
      EXPECT_EQ(in.at(1, x, y), f.v(x, y));
      EXPECT_EQ(in.at(2, x, y), 1.0);
    }
}

TEST(EncodeInput, MaskCountAndZeros) {
  std::mt19937_64 rng(7);
  const auto f = testing_support::random_field(rng);
  const auto l = uniform_layout(kReferenceGrid, 13, 2);
  const auto in = encode_input(l, f);
  int mask = 0;
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) {
      const double m = in.at(2, x, y);
      ASSERT_TRUE(m == 0.0 || m == 1.0);
      mask += static_cast<int>(m);
      if (m == 0.0) {
        EXPECT_EQ(in.at(0, x, y), 0.0);
        EXPECT_EQ(in.at(1, x, y), 0.0);
      } else {
        EXPECT_EQ(in.at(0, x, y), f.u(x, y));
      }
    }
  EXPECT_EQ(mask, 13);
}

TEST(Checkpoint, RoundTripRestoresParametersAndBuffers) {
  testing_support::TempDir dir("ckpt");
  Model<double> m(narrowed(cwgan_spec(), 8), 9);
  round_to_checkpoint_precision(m);
  for (auto* b : m.buffers()) std::fill(b->begin(), b->end(), 0.25);
  save_checkpoint(m, dir / "gan", {{"note", "x"}});
  const auto h = read_checkpoint_header(dir / "gan.json");
  EXPECT_EQ(h.at("note"), "x");
  EXPECT_EQ(h.at("param_count").get<std::size_t>(), m.param_count());
  auto back = load_checkpoint<double>(dir / "gan.json");
  EXPECT_EQ(flat_params(*back), flat_params(m));
  for (auto* b : back->buffers())
    for (double v : *b) EXPECT_EQ(v, 0.25);
  EXPECT_EQ(back->spec().critic_widths, m.spec().critic_widths);
}

TEST(Checkpoint, PayloadIsLittleEndianFloat) {
  testing_support::TempDir dir("ckpt");
  Model<float> m(narrowed(unet_spec(), 8), 10);
  save_checkpoint(m, dir / "u");
  const auto bytes = std::filesystem::file_size(dir / "u.bin");
  EXPECT_EQ(bytes, 4 * m.param_count());
  std::ifstream in(dir / "u.bin", std::ios::binary);
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  const std::uint32_t w = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
  EXPECT_EQ(std::bit_cast<float>(w), m.params()[0]->value[0]);
}

TEST(Checkpoint, TruncatedPayloadRejected) {
  testing_support::TempDir dir("ckpt");
  Model<float> m(narrowed(unet_spec(), 8), 10);
  save_checkpoint(m, dir / "u");
  std::filesystem::resize_file(dir / "u.bin", 100);
  EXPECT_THROW(load_checkpoint<float>(dir / "u.json"), DataError);
}

TEST(Checkpoint, SpecJsonRoundTrip) {
  for (Arch a : {Arch::Unet, Arch::Cwgan, Arch::Vitae}) {
    const auto s = narrowed(default_spec(a), 2);
    const auto back = spec_from_json(spec_to_json(s));
    EXPECT_EQ(analytic_param_count(back), analytic_param_count(s));
    EXPECT_EQ(back.variant, a);
  }
  EXPECT_THROW(spec_from_json(nlohmann::json{{"variant", "mlp"}}), ConfigError);
}
