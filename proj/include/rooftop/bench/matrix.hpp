#pragma once

// Benchmark matrix: layouts, Kriging calibration, model training with an
// on-disk checkpoint cache, evaluation, and resumable per-cell results.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rooftop/bench/config.hpp"
#include "rooftop/bench/csv.hpp"
#include "rooftop/bench/split.hpp"
#include "rooftop/dataset_io.hpp"
#include "rooftop/hash.hpp"
#include "rooftop/kriging.hpp"
#include "rooftop/metrics.hpp"
#include "rooftop/nn/checkpoint.hpp"
#include "rooftop/nn/data.hpp"
#include "rooftop/nn/train.hpp"
#include "rooftop/placement.hpp"
#include "rooftop/pod.hpp"

namespace rooftop::bench {

using Logger = std::function<void(const std::string&)>;

struct SampleRef {
  std::size_t run = 0;  // index into the realization list
  std::size_t t = 0;
};

struct SnapshotRow {
  std::string realization;
  std::size_t t = 0;
  MetricReport report;
};

struct CellResult {
  BenchCell cell;
  std::string status = "ok";
  std::string error;
  std::string hash;
  std::size_t n_snapshots = 0;
  MetricReport aggregate;
  std::vector<SnapshotRow> rows;
  nlohmann::ordered_json provenance;
  bool resumed = false;

  [[nodiscard]] bool ok() const { return status == "ok"; }
};

/// Shared per-run state: split plans, sample lists, layouts and fitted
/// Kriging models, computed lazily and memoized.
class BenchData {
 public:
  BenchData(std::vector<Realization> runs, BenchConfig cfg) : runs_(std::move(runs)), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (runs_.empty()) throw DataError("no realizations");
    grid_ = runs_.front().grid();
    for (const auto& r : runs_)
      if (!(r.grid() == grid_)) throw DataError("realizations use different grids");
    fingerprint_ = rooftop::fingerprint(runs_);
  }

  [[nodiscard]] const std::vector<Realization>& runs() const { return runs_; }
  [[nodiscard]] const BenchConfig& config() const { return cfg_; }
  [[nodiscard]] GridSpec grid() const { return grid_; }
  [[nodiscard]] std::uint64_t fingerprint() const { return fingerprint_; }

  const SplitPlan& plan(Strategy s) {
    auto it = plans_.find(s);
    if (it == plans_.end()) it = plans_.emplace(s, build_split(runs_, s)).first;
    return it->second;
  }

  /// Every snapshot of every training realization.
  std::vector<VelocityField> train_snapshots(Strategy s, int stride = 1) {
    std::vector<VelocityField> out;
    for (std::size_t i : plan(s).train)
      for (std::size_t t = 0; t < runs_[i].snapshots.size(); t += static_cast<std::size_t>(stride))
        out.push_back(runs_[i].snapshots[t]);
    return out;
  }

  [[nodiscard]] std::size_t train_count(Strategy s) {
    std::size_t n = 0;
    for (std::size_t i : plan(s).train) n += runs_[i].snapshots.size();
    return n;
  }

  /// Stride that brings the training set down to the configured cap.
  int train_stride(Strategy s) {
    if (cfg_.train_samples <= 0) return 1;
    const std::size_t n = train_count(s);
    return static_cast<int>(std::max<std::size_t>(1, (n + cfg_.train_samples - 1) / cfg_.train_samples));
  }

  const std::vector<SampleRef>& test_samples(Strategy s) {
    auto it = tests_.find(s);
    if (it != tests_.end()) return it->second;
    std::vector<SampleRef> out;
    for (std::size_t i : plan(s).test)
      for (std::size_t t = 0; t < runs_[i].snapshots.size(); t += static_cast<std::size_t>(cfg_.eval_stride))
        out.push_back({i, t});
    return tests_.emplace(s, std::move(out)).first->second;
  }

  const VelocityField& truth(SampleRef r) const { return runs_[r.run].snapshots[r.t]; }

  /// SSIM data range per component over the split's evaluation set.
  std::pair<double, double> ranges(Strategy s) {
    auto it = ranges_.find(s);
    if (it != ranges_.end()) return it->second;
    std::vector<VelocityField> truths;
    for (const auto& r : test_samples(s)) truths.push_back(truth(r));
    auto rg = component_ranges(truths);
    if (!(rg.first > 0.0)) rg.first = 1.0;
    if (!(rg.second > 0.0)) rg.second = 1.0;
    return ranges_.emplace(s, rg).first->second;
  }

  const PODBasis& pod(Strategy s) {
    auto it = pods_.find(s);
    if (it != pods_.end()) return it->second;
    const auto snaps = train_snapshots(s);
    return pods_.emplace(s, compute_pod(snaps, cfg_.pod_modes)).first->second;
  }

  /// Sensor cells the reconstructor assumes (uniform or QR).
  SensorLayout nominal_layout(Strategy s, Placement p, int k) {
    const Placement nominal = nominal_of(p);
    const auto key = std::tuple(nominal == Placement::Qr ? static_cast<int>(s) : -1, static_cast<int>(nominal), k);
    auto it = layouts_.find(key);
    if (it != layouts_.end()) return it->second;
    SensorLayout l = nominal == Placement::Qr ? layout_from_ranking(qr_rank_sensors(pod(s)), k)
                                              : uniform_layout(grid_, k, mix_seed(cfg_.seed, static_cast<std::uint64_t>(k)));
    return layouts_.emplace(key, l).first->second;
  }

  /// Sensor cells the readings actually come from. Perturbed placements
  /// keep the nominal sensor order, so reading i belongs to nominal cell i.
  SensorLayout actual_layout(Strategy s, Placement p, int k) {
    const SensorLayout nominal = nominal_layout(s, p, k);
    if (!is_perturbed(p)) return nominal;
    return perturb_layout(nominal, perturbation_seed(k));
  }

  [[nodiscard]] std::uint64_t perturbation_seed(int k) const {
    return mix_seed(cfg_.seed ^ 0x7065727475726221ULL, static_cast<std::uint64_t>(k));
  }

  /// Evenly spaced training snapshots used to fit the variogram lengths.
  std::vector<VelocityField> calibration_snapshots(Strategy s) {
    const std::size_t n = train_count(s);
    const std::size_t m = std::min<std::size_t>(n, kCalibrationSnapshots);
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < m; ++i) want.push_back(i * n / m);
    std::vector<VelocityField> out;
    std::size_t offset = 0, w = 0;
    for (std::size_t i : plan(s).train) {
      const std::size_t len = runs_[i].snapshots.size();
      while (w < want.size() && want[w] < offset + len) out.push_back(runs_[i].snapshots[want[w++] - offset]);
      offset += len;
    }
    return out;
  }

  KrigingModel kriging_model(Strategy s, Placement p, int k) {
    const auto key = std::tuple(static_cast<int>(s), static_cast<int>(nominal_of(p)), k);
    auto it = kriging_.find(key);
    if (it != kriging_.end()) return it->second;
    const auto calib = calibration_snapshots(s);
    return kriging_.emplace(key, select_length(nominal_layout(s, p, k), calib)).first->second;
  }

  /// Time-mean of the training realizations (the trivial predictor).
  VelocityField train_mean(Strategy s) {
    VelocityField m(grid_);
    std::size_t n = 0;
    for (std::size_t i : plan(s).train)
      for (const auto& f : runs_[i].snapshots) {
        for (std::size_t j = 0; j < m.raw().size(); ++j) m.raw()[j] += f.raw()[j];
        ++n;
      }
    for (double& v : m.raw()) v /= static_cast<double>(n);
    return m;
  }

 private:
  std::vector<Realization> runs_;
  BenchConfig cfg_;
  GridSpec grid_;
  std::uint64_t fingerprint_ = 0;
  std::map<Strategy, SplitPlan> plans_;
  std::map<Strategy, std::vector<SampleRef>> tests_;
  std::map<Strategy, std::pair<double, double>> ranges_;
  std::map<Strategy, PODBasis> pods_;
  std::map<std::tuple<int, int, int>, SensorLayout> layouts_;
  std::map<std::tuple<int, int, int>, KrigingModel> kriging_;
};

/// Deterministic model seed from the model's identity.
inline std::uint64_t model_seed(const BenchConfig& cfg, Method m, Strategy s, Placement nominal, int k) {
  Fnv1a h;
  h.update(to_string(m) + "/" + to_string(s) + "/" + to_string(nominal) + "/" + std::to_string(k));
  return mix_seed(cfg.seed, h.digest());
}

inline std::string model_stem(Method m, Strategy s, Placement nominal, int k) {
  return to_string(m) + "_" + to_string(s) + "_" + to_string(nominal) + "_k" + std::to_string(k);
}

/// Hash of everything that determines a trained model.
inline std::string model_key(const BenchData& data, Method m, Strategy s, Placement nominal, int k) {
  const auto& cfg = data.config();
  nlohmann::ordered_json j;
  j["model"] = model_stem(m, s, nominal, k);
  j["spec"] = nn::spec_to_json(cfg.arch_spec(m));
  j["seed"] = cfg.seed;
  j["precision"] = to_string(cfg.precision);
  j["max_epochs"] = cfg.max_epochs;
  j["batch_size"] = cfg.batch_size;
  j["train_samples"] = cfg.train_samples;
  j["pod_modes"] = cfg.pod_modes;
  j["data"] = hex64(data.fingerprint());
  Fnv1a h;
  h.update(j.dump());
  return hex64(h.digest());
}

/// Loads the cached checkpoint for a model or trains and caches it. The
/// returned parameters are always the float32 checkpoint values.
template <class T>
std::unique_ptr<nn::Model<T>> obtain_model(BenchData& data, Method m, Strategy s, Placement p, int k,
                                           const std::filesystem::path& models_dir,
                                           nlohmann::ordered_json& provenance, const Logger& log = {}) {
  const Placement nominal = nominal_of(p);
  const auto stem = models_dir / model_stem(m, s, nominal, k);
  const auto meta = std::filesystem::path(stem.string() + ".json");
  const std::string key = model_key(data, m, s, nominal, k);
  if (std::filesystem::exists(meta)) {
    const auto h = nn::read_checkpoint_header(meta);
    if (h.value("train_key", "") == key) {
      provenance["model"] = {{"checkpoint", meta.filename().string()}, {"cached", true},
                             {"epochs_run", h.value("epochs_run", 0)}, {"best_epoch", h.value("best_epoch", 0)},
                             {"train_samples", h.value("train_samples", 0)}};
      return nn::load_checkpoint<T>(meta);
    }
  }
  const auto cfg = data.config();
  const SensorLayout layout = data.nominal_layout(s, p, k);
  const int stride = data.train_stride(s);
  std::vector<const Realization*> train_runs;
  for (std::size_t i : data.plan(s).train) train_runs.push_back(&data.runs()[i]);
  const auto set = nn::make_training_set(train_runs, layout, stride);

  const std::uint64_t seed = model_seed(cfg, m, s, nominal, k);
  auto model = std::make_unique<nn::Model<T>>(cfg.arch_spec(m), seed);
  auto tc = nn::TrainConfig::for_arch(arch_of(m));
  tc.max_epochs = cfg.max_epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = seed;
  if (log) log("train " + model_stem(m, s, nominal, k) + " (" + std::to_string(set.size()) + " samples)");
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = nn::train(*model, set, tc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::ordered_json extra;
  extra["train_key"] = key;
  extra["epochs_run"] = res.history.size();
  extra["best_epoch"] = res.best_epoch;
  extra["best_val_mse"] = res.best_val;
  extra["stopped_early"] = res.stopped_early;
  extra["train_samples"] = res.train_samples;
  extra["val_samples"] = res.val_samples;
  extra["lr"] = tc.lr;
  extra["train_seconds"] = secs;
  auto hist = nlohmann::ordered_json::array();
  for (const auto& e : res.history) hist.push_back({e.epoch, e.train_loss, e.val_loss, e.lr});
  extra["history"] = hist;
  nn::save_checkpoint(*model, stem, extra);
  nn::round_to_checkpoint_precision(*model);
  provenance["model"] = {{"checkpoint", meta.filename().string()}, {"cached", false},
                         {"epochs_run", res.history.size()}, {"best_epoch", res.best_epoch},
                         {"train_samples", res.train_samples}, {"train_seconds", secs}};
  return model;
}

/// Noise seed for evaluating sample i of a cell (adversarial model only).
inline std::uint64_t eval_noise_seed(const BenchConfig& cfg, std::size_t i) {
  return mix_seed(cfg.seed ^ 0x6e6f697365ULL, i);
}

/// Reconstructs every test sample of a cell.
template <class T>
std::vector<VelocityField> learned_predictions(nn::Model<T>& model, const SensorLayout& nominal,
                                               const std::vector<std::vector<double>>& readings,
                                               const BenchConfig& cfg, int members) {
  std::vector<double> inputs;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const auto in = nn::encode_readings(nominal, readings[i]);
    inputs.insert(inputs.end(), in.values.begin(), in.values.end());
    seeds.push_back(eval_noise_seed(cfg, i));
  }
  return nn::predict_many(model, inputs, nominal.grid(), seeds, members, std::max(cfg.batch_size, 64));
}

inline std::string cell_hash(const BenchData& data, const BenchCell& c) {
  Fnv1a h;
  h.update(c.id());
  h.update(data.config().result_settings().dump());
  h.update(hex64(data.fingerprint()));
  return hex64(h.digest());
}

/// Runs one cell from scratch (no resume logic).
inline CellResult evaluate_cell(BenchData& data, const BenchCell& cell, const std::filesystem::path& models_dir,
                                const Logger& log = {}) {
  const auto& cfg = data.config();
  CellResult out;
  out.cell = cell;
  out.hash = cell_hash(data, cell);
  const auto t0 = std::chrono::steady_clock::now();

  const SensorLayout nominal = data.nominal_layout(cell.split, cell.placement, cell.k);
  const SensorLayout actual = data.actual_layout(cell.split, cell.placement, cell.k);
  const auto& samples = data.test_samples(cell.split);
  std::vector<std::vector<double>> readings;
  readings.reserve(samples.size());
  for (const auto& s : samples) readings.push_back(actual.read(data.truth(s)));

  auto cells_json = [](const SensorLayout& l) {
    auto a = nlohmann::ordered_json::array();
    for (const auto& c : l.cells()) a.push_back({c.x, c.y});
    return a;
  };
  out.provenance["seed"] = cfg.seed;
  out.provenance["nominal_cells"] = cells_json(nominal);
  if (is_perturbed(cell.placement)) {
    out.provenance["actual_cells"] = cells_json(actual);
    out.provenance["perturbation_seed"] = data.perturbation_seed(cell.k);
  }

  std::vector<VelocityField> preds;
  if (cell.method == Method::Kriging) {
    const auto model = data.kriging_model(cell.split, cell.placement, cell.k);
    out.provenance["variogram_length"] = {model[0].length, model[1].length};
    const KrigingReconstructor rec(nominal, model);
    for (const auto& r : readings) preds.push_back(rec.reconstruct(r));
  } else {
    const int members = cell.method == Method::Cwgan ? cfg.ensemble_members : 1;
    if (cfg.precision == Precision::F32) {
      auto model = obtain_model<float>(data, cell.method, cell.split, cell.placement, cell.k, models_dir,
                                       out.provenance, log);
      preds = learned_predictions(*model, nominal, readings, cfg, members);
    } else {
      auto model = obtain_model<double>(data, cell.method, cell.split, cell.placement, cell.k, models_dir,
                                        out.provenance, log);
      preds = learned_predictions(*model, nominal, readings, cfg, members);
    }
    out.provenance["model_seed"] = model_seed(cfg, cell.method, cell.split, nominal_of(cell.placement), cell.k);
    out.provenance["ensemble_members"] = members;
  }

  const auto ranges = data.ranges(cell.split);
  std::vector<VelocityField> truths;
  truths.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    truths.push_back(data.truth(samples[i]));
    if (!preds[i].all_finite()) throw NumericalError("non-finite reconstruction in " + cell.id());
    if (cfg.snapshot_rows)
      out.rows.push_back({data.runs()[samples[i].run].label(), samples[i].t,
                          evaluate(preds[i], truths.back(), cfg.fac2_w, ranges)});
  }
  out.aggregate = evaluate_pooled(preds, truths, cfg.fac2_w, ranges);
  out.n_snapshots = samples.size();
  out.provenance["test_snapshots"] = samples.size();
  out.provenance["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---- serialization ------------------------------------------------------

inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "scope", "method", "split", "placement", "k", "realization", "t", "status", "n",
      "ssim", "mg", "nmse", "fac2", "ssim_u", "ssim_v", "mg_u", "mg_v", "nmse_u", "nmse_v",
      "fac2_u", "fac2_v", "mg_points"};
  return cols;
}

inline std::vector<std::string> metric_fields(const MetricReport& r, int digits) {
  return {fmt(r.ssim, digits), fmt(r.mg, digits),     fmt(r.nmse, digits),   fmt(r.fac2, digits),
          fmt(r.u.ssim, digits), fmt(r.v.ssim, digits), fmt(r.u.mg, digits), fmt(r.v.mg, digits),
          fmt(r.u.nmse, digits), fmt(r.v.nmse, digits), fmt(r.u.fac2, digits), fmt(r.v.fac2, digits),
          std::to_string(r.mg_points)};
}

inline MetricReport parse_metric_fields(const std::vector<std::string>& f, std::size_t at) {
  MetricReport r;
  auto num = [&](std::size_t i) { return parse_opt(f[at + i]).value_or(std::nan("")); };
  r.ssim = num(0);
  r.mg = parse_opt(f[at + 1]);
  r.nmse = parse_opt(f[at + 2]);
  r.fac2 = num(3);
  r.u.ssim = num(4);
  r.v.ssim = num(5);
  r.u.mg = parse_opt(f[at + 6]);
  r.v.mg = parse_opt(f[at + 7]);
  r.u.nmse = parse_opt(f[at + 8]);
  r.v.nmse = parse_opt(f[at + 9]);
  r.u.fac2 = num(10);
  r.v.fac2 = num(11);
  r.mg_points = f[at + 12].empty() ? 0 : std::stoi(f[at + 12]);
  return r;
}

inline std::vector<std::string> cell_key_fields(const BenchCell& c) {
  return {to_string(c.method), to_string(c.split), to_string(c.placement), std::to_string(c.k)};
}

inline std::string aggregate_line(const CellResult& r, int digits = 12) {
  auto f = cell_key_fields(r.cell);
  f.insert(f.begin(), "aggregate");
  f.insert(f.end(), {"", "", r.status, std::to_string(r.n_snapshots)});
  if (r.ok()) {
    const auto m = metric_fields(r.aggregate, digits);
    f.insert(f.end(), m.begin(), m.end());
  } else {
    f.resize(result_columns().size(), "");
  }
  return join(f);
}

inline std::string snapshot_line(const CellResult& r, const SnapshotRow& s, int digits = 12) {
  auto f = cell_key_fields(r.cell);
  f.insert(f.begin(), "snapshot");
  f.insert(f.end(), {s.realization, std::to_string(s.t), "ok", "1"});
  const auto m = metric_fields(s.report, digits);
  f.insert(f.end(), m.begin(), m.end());
  return join(f);
}

/// Writes <dir>/<id>.json (status, hash, aggregate, provenance) and, for
/// completed cells, <dir>/<id>.csv with full-precision snapshot rows.
inline void save_cell(const CellResult& r, const std::filesystem::path& dir) {
  nlohmann::ordered_json j;
  j["cell"] = {{"method", to_string(r.cell.method)}, {"split", to_string(r.cell.split)},
               {"placement", to_string(r.cell.placement)}, {"k", r.cell.k}};
  j["hash"] = r.hash;
  j["status"] = r.status;
  if (!r.error.empty()) j["error"] = r.error;
  j["n_snapshots"] = r.n_snapshots;
  if (r.ok()) {
    std::string line = aggregate_line(r, 17);
    j["aggregate"] = line;
  }
  j["provenance"] = r.provenance;
  std::string csv = join(result_columns()) + "\n";
  for (const auto& s : r.rows) csv += snapshot_line(r, s, 17) + "\n";
  if (r.ok()) write_text(dir / (r.cell.id() + ".csv"), csv);
  write_text(dir / (r.cell.id() + ".json"), j.dump(2) + "\n");
}

/// Reads a completed cell back if its hash matches.
inline std::optional<CellResult> load_cell(const BenchCell& cell, const std::string& hash,
                                           const std::filesystem::path& dir) {
  const auto meta = dir / (cell.id() + ".json");
  const auto rows = dir / (cell.id() + ".csv");
  if (!std::filesystem::exists(meta) || !std::filesystem::exists(rows)) return std::nullopt;
  std::ifstream in(meta);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (!j.is_object() || j.value("hash", "") != hash || j.value("status", "") != "ok") return std::nullopt;
  CellResult r;
  r.cell = cell;
  r.hash = hash;
  r.resumed = true;
  r.n_snapshots = j.value("n_snapshots", std::size_t{0});
  r.provenance = j.value("provenance", nlohmann::ordered_json::object());
  const auto agg = split_line(j.at("aggregate").get<std::string>());
  r.aggregate = parse_metric_fields(agg, 9);
  const auto table = read_csv(rows);
  for (const auto& f : table.rows)
    r.rows.push_back({f[5], static_cast<std::size_t>(std::stoull(f[6])), parse_metric_fields(f, 9)});
  return r;
}

/// Results table: each cell's aggregate row followed by its snapshot rows.
inline std::string results_csv(const std::vector<CellResult>& results) {
  std::string out = join(result_columns()) + "\n";
  for (const auto& r : results) {
    out += aggregate_line(r) + "\n";
    for (const auto& s : r.rows) out += snapshot_line(r, s) + "\n";
  }
  return out;
}

/// Trivial predictor (training time-mean) scored like a cell, per split.
inline std::string baseline_csv(BenchData& data) {
  std::string out = "split,ssim,mg,nmse,fac2\n";
  for (Strategy s : data.config().splits) {
    const VelocityField mean = data.train_mean(s);
    std::vector<VelocityField> preds, truths;
    for (const auto& r : data.test_samples(s)) {
      preds.push_back(mean);
      truths.push_back(data.truth(r));
    }
    const auto rep = evaluate_pooled(preds, truths, data.config().fac2_w, data.ranges(s));
    out += join({to_string(s), fmt(rep.ssim), fmt(rep.mg), fmt(rep.nmse), fmt(rep.fac2)}) + "\n";
  }
  return out;
}

/// Runs (or resumes) the listed cells. Writes cells/, models/, results.csv,
/// baseline.csv and run.json under `out_dir`. A failing cell is recorded
/// and the matrix continues.
inline std::vector<CellResult> run_matrix(const std::vector<BenchCell>& cells, BenchData& data,
                                          const std::filesystem::path& out_dir, const Logger& log = {}) {
  const auto cells_dir = out_dir / "cells";
  const auto models_dir = out_dir / "models";
  std::filesystem::create_directories(cells_dir);
  std::filesystem::create_directories(models_dir);

  nlohmann::ordered_json run;
  run["config"] = data.config().to_json();
  run["data_fingerprint"] = hex64(data.fingerprint());
  run["realizations"] = nlohmann::ordered_json::array();
  for (const auto& r : data.runs()) run["realizations"].push_back(r.label());
  write_text(out_dir / "run.json", run.dump(2) + "\n");

  std::vector<CellResult> results;
  std::size_t done = 0;
  for (const auto& cell : cells) {
    ++done;
    const std::string hash = cell_hash(data, cell);
    if (auto cached = load_cell(cell, hash, cells_dir)) {
      if (log) log("[" + std::to_string(done) + "/" + std::to_string(cells.size()) + "] " + cell.id() + " (cached)");
      results.push_back(std::move(*cached));
      continue;
    }
    CellResult r;
    try {
      r = evaluate_cell(data, cell, models_dir, log);
      save_cell(r, cells_dir);
      // Reload so fresh and resumed runs report identical values.
      if (auto again = load_cell(cell, hash, cells_dir)) {
        again->resumed = false;
        again->provenance = r.provenance;
        r = std::move(*again);
      }
    } catch (const std::exception& e) {
      r = CellResult{};
      r.cell = cell;
      r.hash = hash;
      r.status = "failed";
      r.error = e.what();
      save_cell(r, cells_dir);
    }
    if (log)
      log("[" + std::to_string(done) + "/" + std::to_string(cells.size()) + "] " + cell.id() + " " + r.status +
          (r.ok() ? " ssim=" + fmt(r.aggregate.ssim, 4) : ": " + r.error));
    results.push_back(std::move(r));
  }
  write_text(out_dir / "results.csv", results_csv(results));
  write_text(out_dir / "baseline.csv", baseline_csv(data));
  return results;
}

}  // namespace rooftop::bench
