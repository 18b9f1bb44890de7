#pragma once

// Sensor layout JSON: {"grid": {...}, "k": n, "placement": "...", "seed": s,
// "cells": [[x, y], ...]}.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "rooftop/errors.hpp"
#include "rooftop/placement.hpp"

namespace rooftop {

inline nlohmann::ordered_json layout_to_json(const SensorLayout& l, const std::string& placement = "",
                                             std::uint64_t seed = 0) {
  nlohmann::ordered_json j;
  const auto g = l.grid();
  j["grid"] = {{"nx", g.nx}, {"ny", g.ny}, {"components", g.components}};
  j["k"] = l.k();
  if (!placement.empty()) j["placement"] = placement;
  j["seed"] = seed;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : l.cells()) cells.push_back({c.x, c.y});
  j["cells"] = cells;
  return j;
}

inline SensorLayout layout_from_json(const nlohmann::json& j) {
  try {
    GridSpec g = kReferenceGrid;
    if (j.contains("grid")) {
      g.nx = j.at("grid").at("nx").get<int>();
      g.ny = j.at("grid").at("ny").get<int>();
      g.components = j.at("grid").value("components", 2);
    }
    g.validate();
    std::vector<Cell> cells;
    for (const auto& c : j.at("cells")) cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    if (j.contains("k") && j.at("k").get<int>() != static_cast<int>(cells.size()))
      throw ConfigError("layout k does not match its cell list");
    return {g, std::move(cells)};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad layout: ") + e.what());
  }
}

inline void save_layout(const SensorLayout& l, const std::filesystem::path& path, const std::string& placement = "",
                        std::uint64_t seed = 0) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << layout_to_json(l, placement, seed).dump(2) << '\n';
}

inline SensorLayout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("layout is not valid JSON: " + path.string());
  return layout_from_json(j);
}

}  // namespace rooftop
