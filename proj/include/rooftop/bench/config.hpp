#pragma once

// Benchmark cells and run configuration.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rooftop/bench/split.hpp"
#include "rooftop/errors.hpp"
#include "rooftop/hash.hpp"
#include "rooftop/metrics.hpp"
#include "rooftop/nn/models.hpp"
#include "rooftop/pod.hpp"

namespace rooftop::bench {

enum class Method { Kriging, Unet, Cwgan, Vitae };
enum class Placement { Uniform, Perturbed, Qr, QrPerturbed };
enum class Precision { F32, F64 };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Kriging: return "kriging";
    case Method::Unet: return "unet";
    case Method::Cwgan: return "cwgan";
    case Method::Vitae: return "vitae";
  }
  return "?";
}

inline std::string to_string(Placement p) {
  switch (p) {
    case Placement::Uniform: return "uniform";
    case Placement::Perturbed: return "perturbed";
    case Placement::Qr: return "qr";
    case Placement::QrPerturbed: return "qr_perturbed";
  }
  return "?";
}

inline std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

inline Method parse_method(const std::string& s) {
  if (s == "kriging") return Method::Kriging;
  if (s == "unet") return Method::Unet;
  if (s == "cwgan") return Method::Cwgan;
  if (s == "vitae") return Method::Vitae;
  throw ConfigError("unknown method '" + s + "'");
}

inline Placement parse_placement(const std::string& s) {
  if (s == "uniform" || s == "standard") return Placement::Uniform;
  if (s == "perturbed") return Placement::Perturbed;
  if (s == "qr") return Placement::Qr;
  if (s == "qr_perturbed") return Placement::QrPerturbed;
  throw ConfigError("unknown placement '" + s + "'");
}

inline Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::F32;
  if (s == "f64") return Precision::F64;
  throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

inline nn::Arch arch_of(Method m) {
  switch (m) {
    case Method::Unet: return nn::Arch::Unet;
    case Method::Cwgan: return nn::Arch::Cwgan;
    case Method::Vitae: return nn::Arch::Vitae;
    case Method::Kriging: break;
  }
  throw ConfigError("kriging has no neural architecture");
}

inline bool is_perturbed(Placement p) { return p == Placement::Perturbed || p == Placement::QrPerturbed; }

/// Layout a model is trained on (perturbed cells reuse the nominal model).
inline Placement nominal_of(Placement p) {
  if (p == Placement::Perturbed) return Placement::Uniform;
  if (p == Placement::QrPerturbed) return Placement::Qr;
  return p;
}

inline const std::vector<int> kSensorCounts = {5, 10, 15, 20, 25, 30};

struct BenchCell {
  Method method = Method::Kriging;
  Strategy split = Strategy::Mdt;
  Placement placement = Placement::Uniform;
  int k = 5;

  [[nodiscard]] std::string id() const {
    return to_string(method) + "_" + to_string(split) + "_" + to_string(placement) + "_k" + std::to_string(k);
  }
  friend bool operator==(const BenchCell&, const BenchCell&) = default;
};

struct BenchConfig {
  std::vector<Method> methods = {Method::Kriging, Method::Unet, Method::Cwgan, Method::Vitae};
  std::vector<Strategy> splits = {Strategy::Sdt, Strategy::Mdt};
  std::vector<Placement> placements = {Placement::Uniform, Placement::Perturbed, Placement::Qr};
  std::vector<int> ks = kSensorCounts;

  std::uint64_t seed = 0;
  Precision precision = Precision::F64;
  int pod_modes = kDefaultPodModes;
  double fac2_w = kFac2Tolerance;

  // Training budget.
  int max_epochs = 500;
  int batch_size = 64;
  int train_samples = 0;  // cap on training snapshots per model (0 = all)
  std::map<std::string, int> width_divisor;  // per method, default 1

  // Evaluation.
  int eval_stride = 1;  // every n-th snapshot of each test realization
  int ensemble_members = 1;
  bool snapshot_rows = true;

  /// Reduced budget for a single-core run of the full matrix.
  static BenchConfig desk_scale() {
    BenchConfig c;
    c.precision = Precision::F32;
    c.max_epochs = 100;
    c.train_samples = 160;
    c.batch_size = 2;
    c.width_divisor = {{"unet", 4}, {"vitae", 4}, {"cwgan", 8}};
    c.eval_stride = 20;
    return c;
  }

  [[nodiscard]] int divisor(Method m) const {
    const auto it = width_divisor.find(to_string(m));
    return it == width_divisor.end() ? 1 : it->second;
  }

  [[nodiscard]] nn::ArchitectureSpec arch_spec(Method m) const {
    return nn::narrowed(nn::default_spec(arch_of(m)), divisor(m));
  }

  void validate() const {
    if (methods.empty() || splits.empty() || placements.empty() || ks.empty())
      throw ConfigError("benchmark matrix is empty");
    for (int k : ks)
      if (k < 3 || k > kReferenceGrid.cells()) throw ConfigError("sensor count " + std::to_string(k) + " out of range");
    if (pod_modes < 1) throw ConfigError("pod_modes must be positive");
    if (max_epochs < 1 || batch_size < 1 || train_samples < 0) throw ConfigError("invalid training budget");
    if (eval_stride < 1 || ensemble_members < 1) throw ConfigError("invalid evaluation settings");
    for (const auto& [m, d] : width_divisor) {
      parse_method(m);
      if (d < 1) throw ConfigError("width divisor must be positive");
    }
    if (!(fac2_w >= 0.0)) throw ConfigError("fac2 tolerance must be non-negative");
  }

  /// Settings that change a cell's result (the matrix lists are excluded).
  [[nodiscard]] nlohmann::ordered_json result_settings() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["precision"] = to_string(precision);
    j["pod_modes"] = pod_modes;
    j["fac2_w"] = fac2_w;
    j["max_epochs"] = max_epochs;
    j["batch_size"] = batch_size;
    j["train_samples"] = train_samples;
    j["width_divisor"] = width_divisor;
    j["eval_stride"] = eval_stride;
    j["ensemble_members"] = ensemble_members;
    return j;
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    auto names = [](const auto& v) {
      std::vector<std::string> out;
      for (const auto& x : v) out.push_back(to_string(x));
      return out;
    };
    j["methods"] = names(methods);
    j["splits"] = names(splits);
    j["placements"] = names(placements);
    j["ks"] = ks;
    const auto settings = result_settings();
    for (auto it = settings.begin(); it != settings.end(); ++it) j[it.key()] = it.value();
    j["snapshot_rows"] = snapshot_rows;
    return j;
  }

  /// Overrides from a JSON object; unknown keys are rejected.
  static BenchConfig from_json(const nlohmann::json& j) { return from_json(j, BenchConfig{}); }

  static BenchConfig from_json(const nlohmann::json& j, BenchConfig c) {
    if (!j.is_object()) throw ConfigError("benchmark config must be a JSON object");
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const auto& v = it.value();
        if (key == "preset") {
          if (v.get<std::string>() == "desk") {
            auto rest = j;
            rest.erase("preset");
            return from_json(rest, desk_scale());
          }
          if (v.get<std::string>() != "default") throw ConfigError("unknown preset");
        }
      }
      for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const auto& v = it.value();
        if (key == "preset") continue;
        if (key == "methods") {
          c.methods.clear();
          for (const auto& s : v) c.methods.push_back(parse_method(s.get<std::string>()));
        } else if (key == "splits") {
          c.splits.clear();
          for (const auto& s : v) c.splits.push_back(parse_strategy(s.get<std::string>()));
        } else if (key == "placements") {
          c.placements.clear();
          for (const auto& s : v) c.placements.push_back(parse_placement(s.get<std::string>()));
        } else if (key == "ks") {
          c.ks = v.get<std::vector<int>>();
        } else if (key == "seed") {
          c.seed = v.get<std::uint64_t>();
        } else if (key == "precision") {
          c.precision = parse_precision(v.get<std::string>());
        } else if (key == "pod_modes") {
          c.pod_modes = v.get<int>();
        } else if (key == "fac2_w") {
          c.fac2_w = v.get<double>();
        } else if (key == "max_epochs") {
          c.max_epochs = v.get<int>();
        } else if (key == "batch_size") {
          c.batch_size = v.get<int>();
        } else if (key == "train_samples") {
          c.train_samples = v.get<int>();
        } else if (key == "width_divisor") {
          c.width_divisor = v.get<std::map<std::string, int>>();
        } else if (key == "eval_stride") {
          c.eval_stride = v.get<int>();
        } else if (key == "ensemble_members") {
          c.ensemble_members = v.get<int>();
        } else if (key == "snapshot_rows") {
          c.snapshot_rows = v.get<bool>();
        } else {
          throw ConfigError("unknown benchmark setting '" + key + "'");
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad benchmark config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

/// Cartesian product in (split, method, placement, k) order.
inline std::vector<BenchCell> matrix_cells(const BenchConfig& cfg) {
  std::vector<BenchCell> cells;
  for (Strategy s : cfg.splits)
    for (Method m : cfg.methods)
      for (Placement p : cfg.placements)
        for (int k : cfg.ks) cells.push_back({m, s, p, k});
  return cells;
}

}  // namespace rooftop::bench
