#pragma once

// UNet, conditional Wasserstein GAN (UNet generator + strided critic) and
// patch-attention autoencoder built on the autodiff graph.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rooftop/errors.hpp"
#include "rooftop/hash.hpp"
#include "rooftop/nn/graph.hpp"

namespace rooftop::nn {

enum class Arch { Unet, Cwgan, Vitae };

inline std::string to_string(Arch a) {
  switch (a) {
    case Arch::Unet: return "unet";
    case Arch::Cwgan: return "cwgan";
    case Arch::Vitae: return "vitae";
  }
  return "?";
}

inline Arch parse_arch(const std::string& s) {
  if (s == "unet") return Arch::Unet;
  if (s == "cwgan") return Arch::Cwgan;
  if (s == "vitae") return Arch::Vitae;
  throw ConfigError("unknown architecture '" + s + "'");
}

struct ArchitectureSpec {
  Arch variant = Arch::Unet;
  int in_channels = 3;
  int out_channels = 2;
  int height = 15;
  int width = 15;

  // UNet and CWGAN generator: encoder levels (each followed by 2x2 pooling)
  // and the bottleneck width. Spatial dims are zero-padded to `padded`.
  std::vector<int> encoder_widths;
  int bottleneck_width = 0;
  int padded = 16;

  // CWGAN.
  int noise_channels = 0;
  std::vector<int> critic_widths;
  double leaky_slope = 0.2;

  // Patch-attention autoencoder.
  int patch = 3;
  int embed = 64;
  int depth = 8;
  int heads = 8;
  double mlp_ratio = 4.0;
  std::vector<int> decoder_widths;

  [[nodiscard]] int mlp_hidden() const { return static_cast<int>(std::lround(embed * mlp_ratio)); }

  void validate() const {
    if (height < 2 || width < 2) throw ConfigError("architecture grid too small");
    if (variant == Arch::Vitae) {
      if (height % patch || width % patch) throw ConfigError("grid not divisible by patch size");
      if (embed % heads) throw ConfigError("embedding width not divisible by heads");
      if (depth < 1 || decoder_widths.empty()) throw ConfigError("autoencoder needs blocks and a decoder");
    } else {
      if (encoder_widths.empty() || bottleneck_width < 1) throw ConfigError("UNet needs encoder levels");
      const int f = 1 << encoder_widths.size();
      if (padded < height || padded < width || padded % f)
        throw ConfigError("padded size must cover the grid and be divisible by 2^levels");
      if (variant == Arch::Cwgan && critic_widths.empty()) throw ConfigError("critic needs layers");
    }
  }
};

/// UNet: 32 -> 64 encoder levels around a 128-wide bottleneck, decoder 64 -> 32.
inline ArchitectureSpec unet_spec() {
  ArchitectureSpec s;
  s.variant = Arch::Unet;
  s.encoder_widths = {32, 64};
  s.bottleneck_width = 128;
  return s;
}

/// CWGAN: generator 64 -> 128 -> 256 encoder with a 512 bottleneck and one
/// Gaussian noise channel; critic 64 -> 128 -> 256 -> 512 strided convs.
inline ArchitectureSpec cwgan_spec() {
  ArchitectureSpec s;
  s.variant = Arch::Cwgan;
  s.encoder_widths = {64, 128, 256};
  s.bottleneck_width = 512;
  s.noise_channels = 1;
  s.critic_widths = {64, 128, 256, 512};
  return s;
}

/// Autoencoder: 3x3 patches, 64-d tokens, 8 blocks of 8-head attention.
inline ArchitectureSpec vitae_spec() {
  ArchitectureSpec s;
  s.variant = Arch::Vitae;
  s.patch = 3;
  s.embed = 64;
  s.depth = 8;
  s.heads = 8;
  s.mlp_ratio = 4.0;
  s.decoder_widths = {64, 32, 32};
  return s;
}

inline ArchitectureSpec default_spec(Arch a) {
  switch (a) {
    case Arch::Unet: return unet_spec();
    case Arch::Cwgan: return cwgan_spec();
    case Arch::Vitae: return vitae_spec();
  }
  return unet_spec();
}

/// Divides every channel width by `divisor` (rounded, at least 1). Heads
/// are reduced only as far as needed to keep them dividing the embedding.
inline ArchitectureSpec narrowed(ArchitectureSpec s, int divisor) {
  auto shrink = [divisor](int w) { return std::max(1, w / divisor); };
  for (int& w : s.encoder_widths) w = shrink(w);
  if (s.bottleneck_width > 0) s.bottleneck_width = shrink(s.bottleneck_width);
  for (int& w : s.critic_widths) w = shrink(w);
  for (int& w : s.decoder_widths) w = shrink(w);
  if (s.variant == Arch::Vitae) {
    s.embed = shrink(s.embed);
    while (s.heads > 1 && s.embed % s.heads) --s.heads;
  }
  return s;
}

/// Parameter count from the spec alone (conv and dense layers all carry biases).
inline std::size_t analytic_param_count(const ArchitectureSpec& s) {
  auto conv = [](std::size_t ci, std::size_t co, std::size_t k) { return ci * co * k * k + co; };
  auto dense = [](std::size_t di, std::size_t dout) { return di * dout + dout; };
  std::size_t n = 0;
  if (s.variant == Arch::Vitae) {
    const std::size_t d = s.embed, h = s.mlp_hidden();
    const std::size_t tokens = static_cast<std::size_t>(s.height / s.patch) * (s.width / s.patch);
    n += dense(static_cast<std::size_t>(s.in_channels) * s.patch * s.patch, d);
    n += tokens * d;
    const std::size_t block = 2 * d + dense(d, 3 * d) + dense(d, d) + 2 * d + dense(d, h) + dense(h, d);
    n += block * s.depth + 2 * d;
    std::size_t prev = d;
    for (int w : s.decoder_widths) {
      n += conv(prev, w, 3);
      prev = w;
    }
    n += conv(prev, s.out_channels, 3);
    return n;
  }
  std::size_t prev = s.in_channels + s.noise_channels;
  for (int w : s.encoder_widths) {
    n += conv(prev, w, 3) + conv(w, w, 3);
    prev = w;
  }
  n += conv(prev, s.bottleneck_width, 3) + conv(s.bottleneck_width, s.bottleneck_width, 3);
  prev = s.bottleneck_width;
  for (auto it = s.encoder_widths.rbegin(); it != s.encoder_widths.rend(); ++it) {
    n += conv(prev + *it, *it, 3) + conv(*it, *it, 3);
    prev = *it;
  }
  n += conv(prev, s.out_channels, 1);
  if (s.variant == Arch::Cwgan) {
    std::size_t c = s.in_channels + s.out_channels;
    int side = s.padded;
    for (std::size_t i = 0; i < s.critic_widths.size(); ++i) {
      n += conv(c, s.critic_widths[i], 3);
      if (i > 0) n += 2 * static_cast<std::size_t>(s.critic_widths[i]);
      c = s.critic_widths[i];
      side = (side + 1) / 2;
    }
    n += dense(c * side * side, 1);
  }
  return n;
}

template <class T>
struct Conv {
  Parameter<T> w, b;
  int stride = 1, pad = 1;
  Conv() = default;
  Conv(const std::string& name, int ci, int co, int k, int stride_ = 1)
      : w(name + ".w", {co, ci, k, k}), b(name + ".b", {co}), stride(stride_), pad(k / 2) {}
  Var operator()(Graph<T>& g, Var x, bool trainable = true) {
    return g.conv2d(x, g.param(w, trainable), g.param(b, trainable), stride, pad);
  }
};

template <class T>
struct Dense {
  Parameter<T> w, b;
  Dense() = default;
  Dense(const std::string& name, int din, int dout) : w(name + ".w", {dout, din}), b(name + ".b", {dout}) {}
  Var operator()(Graph<T>& g, Var x, bool trainable = true) {
    return g.dense(x, g.param(w, trainable), g.param(b, trainable));
  }
};

template <class T>
struct Norm {
  Parameter<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  Norm() = default;
  Norm(const std::string& name, int c)
      : gamma(name + ".gamma", {c}), beta(name + ".beta", {c}), running_mean(c, T(0)), running_var(c, T(1)) {}
};

template <class T>
class Model {
 public:
  Model(ArchitectureSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    spec_.validate();
    if (spec_.variant == Arch::Vitae)
      build_vitae();
    else
      build_unet();
    if (spec_.variant == Arch::Cwgan) build_critic();
    initialize();
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  [[nodiscard]] const ArchitectureSpec& spec() const { return spec_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] bool has_critic() const { return spec_.variant == Arch::Cwgan; }

  /// Reconstructor parameters (UNet, generator or autoencoder), in a fixed order.
  [[nodiscard]] const std::vector<Parameter<T>*>& params() { return main_params_; }
  [[nodiscard]] const std::vector<Parameter<T>*>& critic_params() { return critic_params_; }

  [[nodiscard]] std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto* p : main_params_) n += p->size();
    for (const auto* p : critic_params_) n += p->size();
    return n;
  }

  /// Running-statistics buffers (critic batchnorm), for checkpointing.
  [[nodiscard]] std::vector<std::vector<T>*> buffers() {
    std::vector<std::vector<T>*> out;
    for (auto& n : critic_norms_) {
      out.push_back(&n.running_mean);
      out.push_back(&n.running_var);
    }
    return out;
  }

  /// input [N, 3, H, W] (and noise [N, noise_channels, H, W] for the GAN)
  /// -> [N, 2, H, W].
  Var forward(Graph<T>& g, Var input, std::optional<Var> noise = std::nullopt) {
    if (spec_.variant == Arch::Vitae) return forward_vitae(g, input);
    Var x = input;
    if (spec_.noise_channels > 0) {
      if (!noise) throw ConfigError("generator requires a noise input");
      x = g.concat_channels(x, *noise);
    }
    return forward_unet(g, x);
  }

  /// Critic score [N, 1] for (condition, field). Parameters receive gradients
  /// only when `trainable`.
  Var critic(Graph<T>& g, Var condition, Var field, bool training, bool trainable = true) {
    Var x = g.concat_channels(condition, field);
    x = g.pad_to(x, spec_.padded, spec_.padded);
    for (std::size_t i = 0; i < critic_convs_.size(); ++i) {
      x = critic_convs_[i](g, x, trainable);
      if (i > 0) {
        auto& n = critic_norms_[i - 1];
        x = g.batchnorm2d(x, g.param(n.gamma, trainable), g.param(n.beta, trainable), n.running_mean,
                          n.running_var, training);
      }
      x = g.leaky_relu(x, static_cast<T>(spec_.leaky_slope));
    }
    const auto s = g.shape(x);
    x = g.reshape(x, {s[0], s[1] * s[2] * s[3]});
    return critic_head_(g, x, trainable);
  }

 private:
  void build_unet() {
    int prev = spec_.in_channels + spec_.noise_channels;
    int level = 0;
    for (int w : spec_.encoder_widths) {
      const std::string nm = "enc" + std::to_string(level++);
      enc_.push_back({Conv<T>(nm + ".0", prev, w, 3), Conv<T>(nm + ".1", w, w, 3)});
      prev = w;
    }
    bottleneck_ = {Conv<T>("mid.0", prev, spec_.bottleneck_width, 3),
                   Conv<T>("mid.1", spec_.bottleneck_width, spec_.bottleneck_width, 3)};
    prev = spec_.bottleneck_width;
    for (int l = static_cast<int>(spec_.encoder_widths.size()) - 1; l >= 0; --l) {
      const int w = spec_.encoder_widths[l];
      const std::string nm = "dec" + std::to_string(l);
      dec_.push_back({Conv<T>(nm + ".0", prev + w, w, 3), Conv<T>(nm + ".1", w, w, 3)});
      prev = w;
    }
    head_ = Conv<T>("head", prev, spec_.out_channels, 1);

    for (auto& pair : enc_) register_conv(pair);
    register_conv(bottleneck_);
    for (auto& pair : dec_) register_conv(pair);
    add_main(head_);
  }

  void build_critic() {
    int prev = spec_.in_channels + spec_.out_channels;
    int side = spec_.padded;
    for (std::size_t i = 0; i < spec_.critic_widths.size(); ++i) {
      const int w = spec_.critic_widths[i];
      critic_convs_.push_back(Conv<T>("critic" + std::to_string(i), prev, w, 3, 2));
      if (i > 0) critic_norms_.push_back(Norm<T>("critic" + std::to_string(i) + ".bn", w));
      prev = w;
      side = (side + 1) / 2;
    }
    critic_head_ = Dense<T>("critic.head", prev * side * side, 1);
    for (std::size_t i = 0; i < critic_convs_.size(); ++i) {
      critic_params_.push_back(&critic_convs_[i].w);
      critic_params_.push_back(&critic_convs_[i].b);
      if (i > 0) {
        critic_params_.push_back(&critic_norms_[i - 1].gamma);
        critic_params_.push_back(&critic_norms_[i - 1].beta);
      }
    }
    critic_params_.push_back(&critic_head_.w);
    critic_params_.push_back(&critic_head_.b);
  }

  struct Block {
    Norm<T> ln1, ln2;
    Dense<T> qkv, proj, fc1, fc2;
  };

  void build_vitae() {
    const int d = spec_.embed;
    const int gh = spec_.height / spec_.patch, gw = spec_.width / spec_.patch;
    embed_ = Dense<T>("patch_embed", spec_.in_channels * spec_.patch * spec_.patch, d);
    pos_ = Parameter<T>("pos_embed", {gh * gw, d});
    blocks_.reserve(spec_.depth);
    for (int i = 0; i < spec_.depth; ++i) {
      const std::string nm = "block" + std::to_string(i);
      blocks_.push_back(Block{Norm<T>(nm + ".ln1", d), Norm<T>(nm + ".ln2", d), Dense<T>(nm + ".qkv", d, 3 * d),
                              Dense<T>(nm + ".proj", d, d), Dense<T>(nm + ".fc1", d, spec_.mlp_hidden()),
                              Dense<T>(nm + ".fc2", spec_.mlp_hidden(), d)});
    }
    final_ln_ = Norm<T>("final_ln", d);
    int prev = d;
    for (std::size_t i = 0; i < spec_.decoder_widths.size(); ++i) {
      decoder_.push_back(Conv<T>("decoder" + std::to_string(i), prev, spec_.decoder_widths[i], 3));
      prev = spec_.decoder_widths[i];
    }
    head_ = Conv<T>("head", prev, spec_.out_channels, 3);

    add_main(embed_);
    main_params_.push_back(&pos_);
    for (auto& b : blocks_) {
      add_norm(b.ln1);
      add_main(b.qkv);
      add_main(b.proj);
      add_norm(b.ln2);
      add_main(b.fc1);
      add_main(b.fc2);
    }
    add_norm(final_ln_);
    for (auto& c : decoder_) add_main(c);
    add_main(head_);
  }

  Var forward_unet(Graph<T>& g, Var x) {
    x = g.pad_to(x, spec_.padded, spec_.padded);
    std::vector<Var> skips;
    for (auto& [c0, c1] : enc_) {
      x = g.relu(c0(g, x));
      x = g.relu(c1(g, x));
      skips.push_back(x);
      x = g.maxpool2x2(x);
    }
    x = g.relu(bottleneck_.first(g, x));
    x = g.relu(bottleneck_.second(g, x));
    for (std::size_t i = 0; i < dec_.size(); ++i) {
      x = g.upsample_nearest(x, 2);
      x = g.concat_channels(x, skips[skips.size() - 1 - i]);
      x = g.relu(dec_[i].first(g, x));
      x = g.relu(dec_[i].second(g, x));
    }
    x = head_(g, x);
    return g.crop_to(x, spec_.height, spec_.width);
  }

  Var forward_vitae(Graph<T>& g, Var input) {
    Var x = embed_(g, g.patchify(input, spec_.patch));
    x = g.add_broadcast(x, g.param(pos_));
    for (auto& b : blocks_) {
      Var h = layernorm(g, x, b.ln1);
      h = b.proj(g, g.multi_head_attention(b.qkv(g, h), spec_.heads));
      x = g.add(x, h);
      h = layernorm(g, x, b.ln2);
      h = b.fc2(g, g.relu(b.fc1(g, h)));
      x = g.add(x, h);
    }
    x = layernorm(g, x, final_ln_);
    Var img = g.tokens_to_image(x, spec_.height / spec_.patch, spec_.width / spec_.patch);
    img = g.relu(decoder_[0](g, img));
    img = g.upsample_nearest(img, spec_.patch);
    for (std::size_t i = 1; i < decoder_.size(); ++i) img = g.relu(decoder_[i](g, img));
    return head_(g, img);
  }

  Var layernorm(Graph<T>& g, Var x, Norm<T>& n) { return g.layernorm(x, g.param(n.gamma), g.param(n.beta)); }

  void register_conv(std::pair<Conv<T>, Conv<T>>& pair) {
    add_main(pair.first);
    add_main(pair.second);
  }
  void add_main(Conv<T>& c) {
    main_params_.push_back(&c.w);
    main_params_.push_back(&c.b);
  }
  void add_main(Dense<T>& d) {
    main_params_.push_back(&d.w);
    main_params_.push_back(&d.b);
  }
  void add_norm(Norm<T>& n) {
    main_params_.push_back(&n.gamma);
    main_params_.push_back(&n.beta);
  }

  /// He-uniform weights, zero biases, unit/zero norm affine terms, 2-D
  /// sinusoidal position table.
  void initialize() {
    std::uint64_t idx = 0;
    auto init = [&](Parameter<T>* p) {
      std::mt19937_64 rng(mix_seed(seed_, idx++));
      const auto& nm = p->name;
      auto ends_with = [&](const char* suf) {
        const std::string s(suf);
        return nm.size() >= s.size() && nm.compare(nm.size() - s.size(), s.size(), s) == 0;
      };
      if (ends_with(".gamma")) {
        std::fill(p->value.begin(), p->value.end(), T(1));
      } else if (ends_with(".b") || ends_with(".beta")) {
        std::fill(p->value.begin(), p->value.end(), T(0));
      } else if (nm == "pos_embed") {
        fill_sinusoid(*p);
      } else {
        std::size_t fan_in = 1;
        for (std::size_t i = 1; i < p->shape.size(); ++i) fan_in *= p->shape[i];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (T& v : p->value) v = static_cast<T>(u(rng));
      }
    };
    for (auto* p : main_params_) init(p);
    for (auto* p : critic_params_) init(p);
  }

  void fill_sinusoid(Parameter<T>& p) {
    const int gw = spec_.width / spec_.patch;
    const int tokens = p.shape[0], d = p.shape[1];
    const int half = d / 2, quarter = std::max(1, half / 2);
    for (int t = 0; t < tokens; ++t) {
      const double coord[2] = {static_cast<double>(t / gw), static_cast<double>(t % gw)};
      for (int j = 0; j < d; ++j) {
        const int axis = j < half ? 0 : 1;
        const int k = (j % half) / 2;
        const double freq = 1.0 / std::pow(10000.0, static_cast<double>(k) / quarter);
        const double a = coord[axis] * freq;
        p.value[static_cast<std::size_t>(t) * d + j] = static_cast<T>((j % 2 == 0) ? std::sin(a) : std::cos(a));
      }
    }
  }

  ArchitectureSpec spec_;
  std::uint64_t seed_;

  std::vector<std::pair<Conv<T>, Conv<T>>> enc_, dec_;
  std::pair<Conv<T>, Conv<T>> bottleneck_;
  Conv<T> head_;

  std::vector<Conv<T>> critic_convs_;
  std::vector<Norm<T>> critic_norms_;
  Dense<T> critic_head_;

  Dense<T> embed_;
  Parameter<T> pos_;
  std::vector<Block> blocks_;
  Norm<T> final_ln_;
  std::vector<Conv<T>> decoder_;

  std::vector<Parameter<T>*> main_params_;
  std::vector<Parameter<T>*> critic_params_;
};

}  // namespace rooftop::nn
