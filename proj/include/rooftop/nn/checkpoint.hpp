#pragma once

// Model checkpoints: <stem>.json header plus <stem>.bin holding every
// parameter (then batchnorm running statistics) as little-endian float32.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "rooftop/dataset_io.hpp"
#include "rooftop/errors.hpp"
#include "rooftop/nn/models.hpp"

namespace rooftop::nn {

inline nlohmann::ordered_json spec_to_json(const ArchitectureSpec& s) {
  nlohmann::ordered_json j;
  j["variant"] = to_string(s.variant);
  j["in_channels"] = s.in_channels;
  j["out_channels"] = s.out_channels;
  j["height"] = s.height;
  j["width"] = s.width;
  if (s.variant == Arch::Vitae) {
    j["patch"] = s.patch;
    j["embed"] = s.embed;
    j["depth"] = s.depth;
    j["heads"] = s.heads;
    j["mlp_ratio"] = s.mlp_ratio;
    j["decoder_widths"] = s.decoder_widths;
  } else {
    j["encoder_widths"] = s.encoder_widths;
    j["bottleneck_width"] = s.bottleneck_width;
    j["padded"] = s.padded;
  }
  if (s.variant == Arch::Cwgan) {
    j["noise_channels"] = s.noise_channels;
    j["critic_widths"] = s.critic_widths;
    j["leaky_slope"] = s.leaky_slope;
  }
  return j;
}

/// Starts from the variant's defaults so partial specs are accepted.
inline ArchitectureSpec spec_from_json(const nlohmann::json& j) {
  try {
    ArchitectureSpec s = default_spec(parse_arch(j.at("variant").get<std::string>()));
    auto opt = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("in_channels", s.in_channels);
    opt("out_channels", s.out_channels);
    opt("height", s.height);
    opt("width", s.width);
    opt("encoder_widths", s.encoder_widths);
    opt("bottleneck_width", s.bottleneck_width);
    opt("padded", s.padded);
    opt("noise_channels", s.noise_channels);
    opt("critic_widths", s.critic_widths);
    opt("leaky_slope", s.leaky_slope);
    opt("patch", s.patch);
    opt("embed", s.embed);
    opt("depth", s.depth);
    opt("heads", s.heads);
    opt("mlp_ratio", s.mlp_ratio);
    opt("decoder_widths", s.decoder_widths);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad architecture spec: ") + e.what());
  }
}

/// Writes <stem>.json and <stem>.bin; `extra` (epoch, metrics, ...) is
/// merged into the header.
template <class T>
std::filesystem::path save_checkpoint(Model<T>& model, const std::filesystem::path& stem,
                                      const nlohmann::ordered_json& extra = {}) {
  nlohmann::ordered_json h;
  h["format"] = "rooftop-checkpoint";
  h["version"] = 1;
  h["spec"] = spec_to_json(model.spec());
  h["seed"] = model.seed();
  h["param_count"] = model.param_count();
  auto tensors = nlohmann::ordered_json::array();
  std::vector<float> flat;
  auto add = [&](const std::string& name, const std::vector<std::size_t>& shape, const auto& values) {
    tensors.push_back({{"name", name}, {"shape", shape}});
    for (auto v : values) flat.push_back(static_cast<float>(v));
  };
  auto add_params = [&](const std::vector<Parameter<T>*>& ps) {
    for (auto* p : ps) add(p->name, std::vector<std::size_t>(p->shape.begin(), p->shape.end()), p->value);
  };
  add_params(model.params());
  add_params(model.critic_params());
  auto bufs = model.buffers();
  for (std::size_t i = 0; i < bufs.size(); ++i)
    add("buffer" + std::to_string(i), {bufs[i]->size()}, *bufs[i]);
  h["tensors"] = tensors;
  const auto bin = std::filesystem::path(stem.string() + ".bin");
  h["payload"] = bin.filename().string();
  h["payload_values"] = flat.size();
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it) h[it.key()] = it.value();

  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw DataError("cannot write " + bin.string());
    for (float f : flat) {
      const std::uint32_t w = detail::to_little_endian(std::bit_cast<std::uint32_t>(f));
      out.write(reinterpret_cast<const char*>(&w), sizeof w);
    }
  }
  const auto meta = std::filesystem::path(stem.string() + ".json");
  std::ofstream out(meta);
  if (!out) throw DataError("cannot write " + meta.string());
  out << h.dump(2) << '\n';
  return meta;
}

inline nlohmann::ordered_json read_checkpoint_header(const std::filesystem::path& meta) {
  std::ifstream in(meta);
  if (!in) throw DataError("cannot open checkpoint " + meta.string());
  try {
    auto h = nlohmann::ordered_json::parse(in);
    if (h.value("format", "") != "rooftop-checkpoint") throw DataError("not a checkpoint: " + meta.string());
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint header: " + std::string(e.what()));
  }
}

/// Rebuilds the model described by the header and fills its parameters.
template <class T>
std::unique_ptr<Model<T>> load_checkpoint(const std::filesystem::path& meta) {
  const auto h = read_checkpoint_header(meta);
  auto model = std::make_unique<Model<T>>(spec_from_json(h.at("spec")), h.at("seed").get<std::uint64_t>());
  const auto bytes = detail::read_file(meta.parent_path() / h.at("payload").get<std::string>());
  std::size_t expected = model->param_count();
  for (auto* b : model->buffers()) expected += b->size();
  if (bytes.size() != expected * sizeof(float))
    throw DataError("checkpoint payload holds " + std::to_string(bytes.size() / sizeof(float)) + " values, expected " +
                    std::to_string(expected));
  std::size_t pos = 0;
  auto next = [&]() {
    std::uint32_t w;
    std::memcpy(&w, bytes.data() + pos, sizeof w);
    pos += sizeof w;
    return static_cast<T>(std::bit_cast<float>(detail::to_little_endian(w)));
  };
  for (auto* p : model->params())
    for (T& v : p->value) v = next();
  for (auto* p : model->critic_params())
    for (T& v : p->value) v = next();
  for (auto* b : model->buffers())
    for (T& v : *b) v = next();
  return model;
}

/// Rounds every stored value through float32, matching a save/load cycle.
template <class T>
void round_to_checkpoint_precision(Model<T>& model) {
  auto r = [](T& v) { v = static_cast<T>(static_cast<float>(v)); };
  for (auto* p : model.params()) std::for_each(p->value.begin(), p->value.end(), r);
  for (auto* p : model.critic_params()) std::for_each(p->value.begin(), p->value.end(), r);
  for (auto* b : model.buffers()) std::for_each(b->begin(), b->end(), r);
}

}  // namespace rooftop::nn
