#pragma once

// Adam, supervised (MSE) and adversarial (WGAN with weight clipping + L1)
// training loops with validation early stopping, and batched inference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rooftop/errors.hpp"
#include "rooftop/hash.hpp"
#include "rooftop/nn/data.hpp"
#include "rooftop/nn/graph.hpp"
#include "rooftop/nn/models.hpp"

namespace rooftop::nn {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 42;
  int patience = 20;
  int plateau_window = 10;
  double plateau_factor = 0.5;
  int critic_steps = 5;
  double l1_weight = 100.0;
  double clip = 0.01;
  int max_epochs = 500;
  int batch_size = 64;
  std::uint64_t seed = 0;  // shuffling and generator noise

  /// Defaults for an architecture (the adversarial model trains at 1e-4).
  static TrainConfig for_arch(Arch a) {
    TrainConfig c;
    if (a == Arch::Cwgan) c.lr = 1e-4;
    return c;
  }

  void validate() const {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (plateau_window < 1 || !(plateau_factor > 0.0 && plateau_factor <= 1.0))
      throw ConfigError("invalid learning-rate plateau settings");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (max_epochs < 1 || batch_size < 1 || critic_steps < 1) throw ConfigError("invalid epoch/batch settings");
    if (!(clip > 0.0) || l1_weight < 0.0) throw ConfigError("invalid adversarial settings");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double critic_loss = 0.0;  // adversarial model only
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
};

template <class T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(b1), b2_(b2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double g = static_cast<double>(p.grad[j]);
        m[j] = b1_ * m[j] + (1.0 - b1_) * g;
        v[j] = b2_ * v[j] + (1.0 - b2_) * g * g;
        const double upd = lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
        p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - upd);
      }
    }
  }

  [[nodiscard]] double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  [[nodiscard]] long steps() const { return t_; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
};

namespace detail {

template <class T>
std::vector<T> gather(const std::vector<double>& src, std::size_t stride, std::span<const std::size_t> idx) {
  std::vector<T> out(idx.size() * stride);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < stride; ++j) out[i * stride + j] = static_cast<T>(src[idx[i] * stride + j]);
  return out;
}

template <class T>
std::vector<T> noise_batch(std::span<const std::uint64_t> seeds, std::size_t plane, int channels) {
  const std::size_t per = plane * static_cast<std::size_t>(channels);
  std::vector<T> out(seeds.size() * per);
  for (std::size_t i = 0; i < seeds.size(); ++i) gaussian_fill<T>(std::span<T>(out).subspan(i * per, per), seeds[i]);
  return out;
}

template <class T>
std::vector<std::vector<T>> snapshot(const std::vector<Parameter<T>*>& ps) {
  std::vector<std::vector<T>> out;
  for (const auto* p : ps) out.push_back(p->value);
  return out;
}

template <class T>
void restore(const std::vector<Parameter<T>*>& ps, const std::vector<std::vector<T>>& vals) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = vals[i];
}

inline void check_finite(double loss, int epoch, const char* what) {
  if (!std::isfinite(loss))
    throw NumericalError(std::string("training diverged: non-finite ") + what + " loss at epoch " +
                         std::to_string(epoch));
}

}  // namespace detail

/// Deterministic 80/20 (by default) split of sample indices.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_val_split(std::size_t n,
                                                                                     double val_fraction,
                                                                                     std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  shuffle_indices(idx, rng);
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

/// Seed of the noise plane for sample `i` of an evaluation with base `seed`.
inline std::uint64_t sample_noise_seed(std::uint64_t seed, std::size_t i) { return mix_seed(seed, i); }

/// Forward pass over `idx` in batches; returns channels-first predictions.
template <class T>
std::vector<T> forward_batches(Model<T>& model, const std::vector<double>& inputs, std::span<const std::size_t> idx,
                               std::span<const std::uint64_t> noise_seeds, int batch_size) {
  const auto& s = model.spec();
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  const std::size_t in_sz = plane * s.in_channels, out_sz = plane * s.out_channels;
  std::vector<T> out(idx.size() * out_sz);
  for (std::size_t b0 = 0; b0 < idx.size(); b0 += static_cast<std::size_t>(batch_size)) {
    const std::size_t nb = std::min<std::size_t>(batch_size, idx.size() - b0);
    const auto bidx = idx.subspan(b0, nb);
    Graph<T> g(false);
    const int n = static_cast<int>(nb);
    Var x = g.input({n, s.in_channels, s.height, s.width}, detail::gather<T>(inputs, in_sz, bidx));
    std::optional<Var> z;
    if (s.noise_channels > 0)
      z = g.input({n, s.noise_channels, s.height, s.width},
                  detail::noise_batch<T>(noise_seeds.subspan(b0, nb), plane, s.noise_channels));
    Var y = model.forward(g, x, z);
    const auto v = g.value(y);
    std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(b0 * out_sz));
  }
  return out;
}

template <class T>
double mse_over(Model<T>& model, const TrainingSet& data, std::span<const std::size_t> idx,
                std::span<const std::uint64_t> noise_seeds, int batch_size) {
  const auto pred = forward_batches(model, data.inputs, idx, noise_seeds, batch_size);
  const std::size_t out_sz = data.target_size();
  double acc = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < out_sz; ++j) {
      const double d = static_cast<double>(pred[i * out_sz + j]) - data.targets[idx[i] * out_sz + j];
      acc += d * d;
    }
  return acc / static_cast<double>(idx.size() * out_sz);
}

/// One Wasserstein critic update on samples `idx`: loss mean D(fake) -
/// mean D(real), then every critic parameter is clipped to [-clip, clip].
/// The fake fields come from a graph without gradient tracking, so the
/// generator parameters are never written. Returns the loss.
template <class T>
double critic_step(Model<T>& model, const TrainingSet& data, std::span<const std::size_t> idx,
                   std::span<const std::uint64_t> noise_seeds, Adam<T>& critic_opt, double clip) {
  const auto& s = model.spec();
  const int n = static_cast<int>(idx.size());
  const std::size_t in_sz = data.input_size(), out_sz = data.target_size();
  const auto fake = forward_batches(model, data.inputs, idx, noise_seeds, n);

  critic_opt.zero_grad();
  Graph<T> g(true);
  Var cond = g.input({n, s.in_channels, s.height, s.width}, detail::gather<T>(data.inputs, in_sz, idx));
  Var real = g.input({n, s.out_channels, s.height, s.width}, detail::gather<T>(data.targets, out_sz, idx));
  Var gen = g.input({n, s.out_channels, s.height, s.width}, fake);
  Var d_real = g.mean(model.critic(g, cond, real, true));
  Var d_fake = g.mean(model.critic(g, cond, gen, true));
  Var loss = g.sub(d_fake, d_real);
  const double l = static_cast<double>(g.scalar(loss));
  g.backward(loss);
  critic_opt.step();
  for (auto* p : model.critic_params())
    for (T& v : p->value) v = std::clamp(v, static_cast<T>(-clip), static_cast<T>(clip));
  return l;
}

/// Called after every epoch; returning false stops training.
template <class T>
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Trains in place. The returned model holds the best-validation parameters.
template <class T>
TrainResult train(Model<T>& model, const TrainingSet& data, const TrainConfig& cfg,
                  const EpochCallback<T>& on_epoch = {}) {
  cfg.validate();
  if (data.size() < 10) throw DataError("training needs at least 10 snapshots");
  const auto& s = model.spec();
  if (data.grid.nx != s.width || data.grid.ny != s.height) throw DataError("training grid does not match model");

  auto [train_idx, val_idx] = train_val_split(data.size(), cfg.val_fraction, cfg.split_seed);
  TrainResult result;
  result.train_samples = train_idx.size();
  result.val_samples = val_idx.size();

  const bool adversarial = model.has_critic();
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  const std::size_t in_sz = data.input_size(), out_sz = data.target_size();

  Adam<T> opt(model.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::optional<Adam<T>> critic_opt;
  if (adversarial) critic_opt.emplace(model.critic_params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);

  std::vector<std::uint64_t> val_seeds(val_idx.size());
  for (std::size_t i = 0; i < val_idx.size(); ++i) val_seeds[i] = mix_seed(cfg.seed ^ 0x76616cULL, i);

  auto best = detail::snapshot(model.params());
  int since_best = 0, since_plateau = 0;
  std::uint64_t noise_counter = 0;
  std::mt19937_64 critic_rng(mix_seed(cfg.seed, 0x637269746963ULL));

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order = train_idx;
    shuffle_indices(order, rng);

    double loss_acc = 0.0, critic_acc = 0.0;
    std::size_t seen = 0, critic_seen = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t nb = std::min<std::size_t>(cfg.batch_size, order.size() - b0);
      const std::span<const std::size_t> bidx(order.data() + b0, nb);
      const int n = static_cast<int>(nb);
      const Shape in_shape{n, s.in_channels, s.height, s.width};
      const Shape out_shape{n, s.out_channels, s.height, s.width};

      if (!adversarial) {
        opt.zero_grad();
        Graph<T> g(true);
        Var x = g.input(in_shape, detail::gather<T>(data.inputs, in_sz, bidx));
        const auto target = detail::gather<T>(data.targets, out_sz, bidx);
        Var loss = g.mse_loss(model.forward(g, x), target);
        const double l = static_cast<double>(g.scalar(loss));
        detail::check_finite(l, epoch, "training");
        g.backward(loss);
        opt.step();
        loss_acc += l * static_cast<double>(nb);
        seen += nb;
        continue;
      }

      // Critic updates on independently drawn batches.
      for (int c = 0; c < cfg.critic_steps; ++c) {
        std::vector<std::size_t> cidx(nb);
        for (auto& i : cidx) i = train_idx[static_cast<std::size_t>(critic_rng() % train_idx.size())];
        std::vector<std::uint64_t> seeds(nb);
        for (auto& sd : seeds) sd = mix_seed(cfg.seed, noise_counter++);
        const double l = critic_step(model, data, cidx, seeds, *critic_opt, cfg.clip);
        detail::check_finite(l, epoch, "critic");
        critic_acc += l;
        ++critic_seen;
      }

      opt.zero_grad();
      Graph<T> g(true);
      Var cond = g.input(in_shape, detail::gather<T>(data.inputs, in_sz, bidx));
      std::vector<std::uint64_t> seeds(nb);
      for (auto& sd : seeds) sd = mix_seed(cfg.seed, noise_counter++);
      Var z = g.input({n, s.noise_channels, s.height, s.width},
                      detail::noise_batch<T>(std::span<const std::uint64_t>(seeds), plane, s.noise_channels));
      Var fake = model.forward(g, cond, z);
      const auto target = detail::gather<T>(data.targets, out_sz, bidx);
      Var adv = g.scale(g.mean(model.critic(g, cond, fake, true, false)), T(-1));
      Var rec = g.l1_loss(fake, target);
      Var loss = g.add(adv, g.scale(rec, static_cast<T>(cfg.l1_weight)));
      const double l = static_cast<double>(g.scalar(loss));
      detail::check_finite(l, epoch, "generator");
      g.backward(loss);
      opt.step();
      loss_acc += l * static_cast<double>(nb);
      seen += nb;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_acc / static_cast<double>(seen);
    rec.val_loss = mse_over(model, data, val_idx, val_seeds, std::max(cfg.batch_size, 64));
    rec.lr = opt.lr();
    rec.critic_loss = critic_seen ? critic_acc / static_cast<double>(critic_seen) : 0.0;
    detail::check_finite(rec.val_loss, epoch, "validation");
    result.history.push_back(rec);

    if (rec.val_loss < result.best_val) {
      result.best_val = rec.val_loss;
      result.best_epoch = epoch;
      best = detail::snapshot(model.params());
      since_best = 0;
      since_plateau = 0;
    } else {
      ++since_best;
      if (++since_plateau >= cfg.plateau_window) {
        opt.set_lr(opt.lr() * cfg.plateau_factor);
        if (critic_opt) critic_opt->set_lr(critic_opt->lr() * cfg.plateau_factor);
        since_plateau = 0;
      }
    }
    if (on_epoch && !on_epoch(rec)) break;
    if (since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  detail::restore(model.params(), best);
  return result;
}

/// Reconstruction for one input. The adversarial model draws its noise
/// plane from `noise_seed`; the other models ignore it.
template <class T>
VelocityField predict(Model<T>& model, const ModelInput& in, std::uint64_t noise_seed = 0) {
  const std::vector<std::size_t> idx{0};
  const std::vector<std::uint64_t> seeds{noise_seed};
  const auto out = forward_batches(model, in.values, idx, seeds, 1);
  return planes_to_field<T>(out, in.grid);
}

/// Elementwise mean of `m` predictions with noise seeds noise_seed + j.
template <class T>
VelocityField ensemble_predict(Model<T>& model, const ModelInput& in, int m, std::uint64_t noise_seed) {
  if (m < 1) throw ConfigError("ensemble size must be positive");
  VelocityField acc(in.grid);
  for (int j = 0; j < m; ++j) {
    const VelocityField f = predict(model, in, noise_seed + static_cast<std::uint64_t>(j));
    for (std::size_t i = 0; i < acc.raw().size(); ++i) acc.raw()[i] += f.raw()[i];
  }
  if (m > 1)
    for (double& v : acc.raw()) v /= m;
  return acc;
}

/// Batched predictions for inputs stacked sample-major; member j of the
/// ensemble for sample i uses noise seed seeds[i] + j.
template <class T>
std::vector<VelocityField> predict_many(Model<T>& model, const std::vector<double>& inputs, GridSpec grid,
                                        std::span<const std::uint64_t> seeds, int members = 1,
                                        int batch_size = 64) {
  const std::size_t in_sz = static_cast<std::size_t>(kInputChannels) * grid.cells();
  const std::size_t n = inputs.size() / in_sz;
  if (seeds.size() != n) throw ConfigError("one noise seed per sample required");
  if (members < 1) throw ConfigError("ensemble size must be positive");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const std::size_t out_sz = static_cast<std::size_t>(kOutputChannels) * grid.cells();
  std::vector<double> acc(n * out_sz, 0.0);
  std::vector<std::uint64_t> member_seeds(n);
  for (int j = 0; j < members; ++j) {
    for (std::size_t i = 0; i < n; ++i) member_seeds[i] = seeds[i] + static_cast<std::uint64_t>(j);
    const auto out = forward_batches(model, inputs, idx, member_seeds, batch_size);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(out[i]);
  }
  std::vector<VelocityField> fields;
  fields.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> p(acc.data() + i * out_sz, out_sz);
    if (members > 1)
      for (double& v : p) v /= members;
    fields.push_back(planes_to_field<double>(p, grid));
  }
  return fields;
}

}  // namespace rooftop::nn
