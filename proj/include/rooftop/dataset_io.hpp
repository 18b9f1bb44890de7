#pragma once

// Realization files: a JSON metadata header next to a raw payload of
// little-endian float32 values ordered [t][y][x][component].

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rooftop/errors.hpp"
#include "rooftop/field.hpp"
#include "rooftop/hash.hpp"

namespace rooftop {

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

inline std::vector<char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline Realization load_realization(const std::filesystem::path& meta_path) {
  nlohmann::json meta;
  try {
    std::ifstream in(meta_path);
    if (!in) throw DataError("cannot open " + meta_path.string());
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed header " + meta_path.string() + ": " + e.what());
  }

  Realization r;
  GridSpec grid;
  bool normalized = true;
  std::string payload;
  std::int64_t n = 0;
  try {
    grid.nx = meta.at("grid").at("nx").get<int>();
    grid.ny = meta.at("grid").at("ny").get<int>();
    grid.components = meta.at("grid").at("components").get<int>();
    n = meta.at("n_snapshots").get<std::int64_t>();
    r.dt = meta.at("dt_seconds").get<double>();
    r.u_ref = meta.at("u_ref_ms").get<double>();
    r.z_over_h = meta.at("z_over_h").get<double>();
    r.direction_deg = meta.at("direction_deg").get<double>();
    r.run_index = meta.at("run_index").get<int>();
    normalized = meta.at("normalized").get<bool>();
    payload = meta.at("payload").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed header " + meta_path.string() + ": " + e.what());
  }
  grid.validate();
  if (n < 0) throw DataError("negative snapshot count");

  const auto bytes = detail::read_file(meta_path.parent_path() / payload);
  const std::size_t per = static_cast<std::size_t>(grid.dof());
  const std::size_t expected = static_cast<std::size_t>(n) * per;
  if (bytes.size() != expected * sizeof(float))
    throw DataError("payload holds " + std::to_string(bytes.size() / sizeof(float)) +
                    " values, header declares " + std::to_string(expected));

  const double scale = normalized ? 1.0 : 1.0 / r.u_ref;
  if (!normalized && !(r.u_ref > 0.0)) throw DataError("raw payload requires u_ref > 0");
  r.snapshots.reserve(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) {
    std::vector<double> vals(per);
    for (std::size_t i = 0; i < per; ++i) {
      std::uint32_t w;
      std::memcpy(&w, bytes.data() + (static_cast<std::size_t>(t) * per + i) * 4, 4);
      w = detail::to_little_endian(w);
      const float f = std::bit_cast<float>(w);
      if (!std::isfinite(f)) throw DataError("non-finite value in payload");
      vals[i] = normalized ? static_cast<double>(f) : static_cast<double>(f) * scale;
    }
    r.snapshots.emplace_back(grid, std::move(vals));
  }
  r.validate();
  return r;
}

/// Writes `<stem>.json` and `<stem>.bin` into `dir`. Values are stored normalized.
inline std::filesystem::path save_realization(const Realization& r, const std::filesystem::path& dir,
                                              const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto grid = r.grid();
  nlohmann::ordered_json meta;
  meta["grid"] = {{"nx", grid.nx}, {"ny", grid.ny}, {"components", grid.components}};
  meta["n_snapshots"] = r.snapshots.size();
  meta["dt_seconds"] = r.dt;
  meta["u_ref_ms"] = r.u_ref;
  meta["z_over_h"] = r.z_over_h;
  meta["direction_deg"] = r.direction_deg;
  meta["run_index"] = r.run_index;
  meta["normalized"] = true;
  meta["payload"] = stem + ".bin";

  std::vector<char> bytes;
  bytes.reserve(r.snapshots.size() * static_cast<std::size_t>(grid.dof()) * 4);
  for (const auto& s : r.snapshots) {
    for (double v : s.raw()) {
      const std::uint32_t w = detail::to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      char buf[4];
      std::memcpy(buf, &w, 4);
      bytes.insert(bytes.end(), buf, buf + 4);
    }
  }
  {
    std::ofstream out(dir / (stem + ".bin"), std::ios::binary);
    if (!out) throw DataError("cannot write payload in " + dir.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  const auto meta_path = dir / (stem + ".json");
  std::ofstream out(meta_path);
  if (!out) throw DataError("cannot write " + meta_path.string());
  out << meta.dump(2) << '\n';
  return meta_path;
}

inline std::string realization_stem(const Realization& r) { return r.label(); }

/// Loads every realization header in `dir` (files whose JSON has a "payload" key),
/// ordered by (direction, run).
inline std::vector<Realization> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a dataset directory: " + dir.string());
  std::vector<std::filesystem::path> metas;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    std::ifstream in(e.path());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_object() && j.contains("payload")) metas.push_back(e.path());
  }
  std::sort(metas.begin(), metas.end());
  std::vector<Realization> out;
  for (const auto& m : metas) out.push_back(load_realization(m));
  std::stable_sort(out.begin(), out.end(), [](const Realization& a, const Realization& b) {
    if (a.direction_deg != b.direction_deg) return a.direction_deg < b.direction_deg;
    return a.run_index < b.run_index;
  });
  if (out.empty()) throw DataError("no realizations found in " + dir.string());
  return out;
}

/// Content fingerprint of a set of realizations (metadata + values).
inline std::uint64_t fingerprint(std::span<const Realization> rs) {
  Fnv1a h;
  for (const auto& r : rs) {
    h.update_value(r.direction_deg);
    h.update_value(r.run_index);
    h.update_value(r.snapshots.size());
    for (const auto& s : r.snapshots)
      for (double v : s.raw()) h.update_value(static_cast<float>(v));
  }
  return h.digest();
}

}  // namespace rooftop
