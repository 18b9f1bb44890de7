#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rooftop/nn/data.hpp"
#include "rooftop/nn/train.hpp"
#include "rooftop/placement.hpp"
#include "rooftop/synth.hpp"

using namespace rooftop;
using namespace rooftop::nn;

namespace {

TrainingSet synth_set(int n, double fluct, std::uint64_t seed, int k = 10) {
  SynthConfig cfg;
  cfg.direction = 45.0;
  cfg.n_snapshots = n;
  cfg.fluct_scale = fluct;
  cfg.seed = seed;
  const auto r = synth_realization(cfg);
  const Realization* runs[] = {&r};
  return make_training_set(runs, uniform_layout(kReferenceGrid, k, 0), 1);
}

std::vector<double> flat(const std::vector<Parameter<float>*>& ps) {
  std::vector<double> out;
  for (auto* p : ps) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

}  // namespace

TEST(TrainConfig, Defaults) {
  const auto c = TrainConfig::for_arch(Arch::Unet);
  EXPECT_DOUBLE_EQ(c.lr, 1e-3);
  EXPECT_DOUBLE_EQ(TrainConfig::for_arch(Arch::Cwgan).lr, 1e-4);
  EXPECT_DOUBLE_EQ(c.val_fraction, 0.2);
  EXPECT_EQ(c.split_seed, 42u);
  EXPECT_EQ(c.patience, 20);
  EXPECT_EQ(c.plateau_window, 10);
  EXPECT_DOUBLE_EQ(c.plateau_factor, 0.5);
  EXPECT_EQ(c.critic_steps, 5);
  EXPECT_DOUBLE_EQ(c.l1_weight, 100.0);
  EXPECT_DOUBLE_EQ(c.clip, 0.01);
  TrainConfig bad;
  bad.val_fraction = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.patience = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Split, EightyTwentyDisjointDeterministic) {
  const auto [tr, va] = train_val_split(100, 0.2, 42);
  EXPECT_EQ(tr.size(), 80u);
  EXPECT_EQ(va.size(), 20u);
  std::vector<std::size_t> all(tr);
  all.insert(all.end(), va.begin(), va.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(train_val_split(100, 0.2, 42), train_val_split(100, 0.2, 42));
  EXPECT_NE(train_val_split(100, 0.2, 42).second, train_val_split(100, 0.2, 43).second);
}

TEST(TrainingSet, LayoutAndStride) {
  const auto s = synth_set(20, 0.1, 1);
  EXPECT_EQ(s.size(), 20u);
  EXPECT_EQ(s.input_size(), 675u);
  EXPECT_EQ(s.target_size(), 450u);
  SynthConfig cfg;
  cfg.n_snapshots = 20;
  const auto r = synth_realization(cfg);
  const Realization* runs[] = {&r, &r};
  EXPECT_EQ(make_training_set(runs, uniform_layout(kReferenceGrid, 5, 0), 3).size(), 14u);
}

TEST(Train, RejectsTinyDataset) {
  Model<float> m(narrowed(unet_spec(), 8), 1);
  EXPECT_THROW(train(m, synth_set(9, 0.1, 1), TrainConfig{}), DataError);
}

TEST(Train, ConstantFieldIsMemorized) {
  const auto data = synth_set(40, 0.0, 1);
  Model<float> m(unet_spec(), 11);
  TrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.batch_size = 4;
  const auto r = train(m, data, cfg);
  EXPECT_LT(r.best_val, 1e-4);
  EXPECT_LE(r.history.size(), 50u);
}

TEST(Train, FullBatchTinyLrDescends) {
  const auto data = synth_set(30, 0.1, 2);
  Model<double> m(narrowed(unet_spec(), 4), 12);
  TrainConfig cfg;
  cfg.max_epochs = 15;
  cfg.batch_size = 1000;
  cfg.lr = 1e-5;
  const auto r = train(m, data, cfg);
  ASSERT_EQ(r.history.size(), 15u);
  for (std::size_t i = 1; i < r.history.size(); ++i)
    EXPECT_LE(r.history[i].train_loss, r.history[i - 1].train_loss) << "epoch " << i + 1;
}

TEST(Train, RestoresBestValidationParameters) {
  const auto data = synth_set(40, 0.2, 3);
  Model<float> m(narrowed(unet_spec(), 4), 13);
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.batch_size = 8;
  cfg.lr = 0.03;  // noisy on purpose
  cfg.patience = 4;
  cfg.plateau_window = 100;
  const auto r = train(m, data, cfg);
  ASSERT_TRUE(r.stopped_early);
  EXPECT_EQ(static_cast<int>(r.history.size()), r.best_epoch + cfg.patience);
  double min_val = INFINITY;
  for (const auto& e : r.history) min_val = std::min(min_val, e.val_loss);
  EXPECT_EQ(min_val, r.best_val);
  EXPECT_LT(r.best_val, r.history.back().val_loss);
  const auto [tr, va] = train_val_split(data.size(), cfg.val_fraction, cfg.split_seed);
  std::vector<std::uint64_t> seeds(va.size(), 0);
  EXPECT_DOUBLE_EQ(mse_over(m, data, va, seeds, 64), r.best_val);
}

TEST(Train, PlateauHalvesLearningRate) {
  const auto data = synth_set(20, 0.2, 4);
  Model<float> m(narrowed(unet_spec(), 8), 14);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.lr = 0.05;
  cfg.patience = 1000;
  cfg.plateau_window = 2;
  const auto r = train(m, data, cfg);
  bool halved = false;
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    const double ratio = r.history[i].lr / r.history[i - 1].lr;
    EXPECT_TRUE(ratio == 1.0 || ratio == 0.5);
    halved = halved || ratio == 0.5;
  }
  EXPECT_TRUE(halved);
}

TEST(Train, CallbackCanStop) {
  const auto data = synth_set(20, 0.1, 5);
  Model<float> m(narrowed(unet_spec(), 8), 15);
  TrainConfig cfg;
  cfg.max_epochs = 30;
  const auto r = train<float>(m, data, cfg, [](const EpochRecord& e) { return e.epoch < 3; });
  EXPECT_EQ(r.history.size(), 3u);
}

TEST(Train, Deterministic) {
  const auto data = synth_set(24, 0.1, 6);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 8;
  Model<float> a(narrowed(vitae_spec(), 8), 16), b(narrowed(vitae_spec(), 8), 16);
  train(a, data, cfg);
  train(b, data, cfg);
  EXPECT_EQ(flat(a.params()), flat(b.params()));
}

TEST(Critic, StepLeavesGeneratorBitIdenticalAndClips) {
  const auto data = synth_set(16, 0.1, 7);
  Model<float> m(narrowed(cwgan_spec(), 8), 17);
  const auto gen_before = flat(m.params());
  const auto critic_before = flat(m.critic_params());
  Adam<float> opt(m.critic_params(), 1e-2);
  std::vector<std::size_t> idx = {0, 3, 5, 7};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
  for (int s = 0; s < 3; ++s) {
    const double l = critic_step(m, data, idx, seeds, opt, 0.01);
    EXPECT_TRUE(std::isfinite(l));
    for (auto* p : m.critic_params())
      for (float v : p->value) ASSERT_LE(std::abs(v), 0.01f) << p->name;
  }
  EXPECT_EQ(flat(m.params()), gen_before);
  EXPECT_NE(flat(m.critic_params()), critic_before);
}

TEST(Critic, AdversarialTrainingKeepsClipBound) {
  const auto data = synth_set(20, 0.1, 8);
  Model<float> m(narrowed(cwgan_spec(), 8), 18);
  auto cfg = TrainConfig::for_arch(Arch::Cwgan);
  cfg.max_epochs = 2;
  cfg.batch_size = 8;
  const auto r = train<float>(m, data, cfg, [&](const EpochRecord&) {
    for (auto* p : m.critic_params())
      for (float v : p->value)
        if (std::abs(v) > 0.01f) return false;
    return true;
  });
  EXPECT_EQ(r.history.size(), 2u);
  for (const auto& e : r.history) EXPECT_NE(e.critic_loss, 0.0);
}

TEST(Predict, DeterministicWithoutNoise) {
  const auto data = synth_set(10, 0.1, 9);
  Model<float> m(narrowed(unet_spec(), 4), 19);
  ModelInput in{kReferenceGrid, std::vector<double>(data.inputs.begin(), data.inputs.begin() + 675)};
  EXPECT_EQ(predict(m, in), predict(m, in));
  EXPECT_EQ(predict(m, in, 1), predict(m, in, 2));
}

TEST(Predict, GeneratorNoiseMatters) {
  const auto data = synth_set(10, 0.1, 10);
  Model<float> m(narrowed(cwgan_spec(), 8), 20);
  ModelInput in{kReferenceGrid, std::vector<double>(data.inputs.begin(), data.inputs.begin() + 675)};
  EXPECT_EQ(predict(m, in, 5), predict(m, in, 5));
  EXPECT_NE(predict(m, in, 5), predict(m, in, 6));
}

TEST(Ensemble, SingleMemberEqualsPredict) {
  const auto data = synth_set(10, 0.1, 11);
  Model<float> m(narrowed(cwgan_spec(), 8), 21);
  ModelInput in{kReferenceGrid, std::vector<double>(data.inputs.begin(), data.inputs.begin() + 675)};
  EXPECT_EQ(ensemble_predict(m, in, 1, 77), predict(m, in, 77));
  EXPECT_THROW(ensemble_predict(m, in, 0, 77), ConfigError);
}

TEST(Ensemble, AveragesMembers) {
  const auto data = synth_set(10, 0.1, 12);
  Model<float> m(narrowed(cwgan_spec(), 8), 22);
  ModelInput in{kReferenceGrid, std::vector<double>(data.inputs.begin(), data.inputs.begin() + 675)};
  const auto e = ensemble_predict(m, in, 3, 10);
  VelocityField manual(kReferenceGrid);
  for (int j = 0; j < 3; ++j) {
    const auto p = predict(m, in, 10 + j);
    for (std::size_t i = 0; i < manual.raw().size(); ++i) manual.raw()[i] += p.raw()[i] / 3.0;
  }
  for (std::size_t i = 0; i < manual.raw().size(); ++i) EXPECT_NEAR(e.raw()[i], manual.raw()[i], 1e-6);
  const std::vector<std::uint64_t> seeds = {10};
  const auto many = predict_many(m, in.values, kReferenceGrid, seeds, 3);
  for (std::size_t i = 0; i < manual.raw().size(); ++i) EXPECT_NEAR(many[0].raw()[i], e.raw()[i], 1e-12);
}

TEST(Noise, GaussianFillMoments) {
  std::vector<double> v(100000);
  gaussian_fill<double>(v, 3);
  double s = 0, ss = 0;
  for (double x : v) {
    s += x;
    ss += x * x;
  }
  EXPECT_NEAR(s / v.size(), 0.0, 0.02);
  EXPECT_NEAR(ss / v.size(), 1.0, 0.02);
  std::vector<double> w(100000);
  gaussian_fill<double>(w, 3);
  EXPECT_EQ(v, w);
}
