// rooftop: synthetic data, sensor placement, training, reconstruction,
// evaluation and benchmark commands.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rooftop/bench/analysis.hpp"
#include "rooftop/bench/config.hpp"
#include "rooftop/bench/matrix.hpp"
#include "rooftop/bench/report.hpp"
#include "rooftop/dataset_io.hpp"
#include "rooftop/errors.hpp"
#include "rooftop/kriging.hpp"
#include "rooftop/layout_io.hpp"
#include "rooftop/metrics.hpp"
#include "rooftop/nn/checkpoint.hpp"
#include "rooftop/nn/train.hpp"
#include "rooftop/placement.hpp"
#include "rooftop/pod.hpp"
#include "rooftop/synth.hpp"

namespace fs = std::filesystem;
using namespace rooftop;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  std::string out = "out";
  std::string precision = "f64";
  bool precision_set = false;
  bool quiet = false;
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
  return j;
}

void log_line(const Globals& g, const std::string& s) {
  if (!g.quiet) std::cerr << s << '\n';
}

std::vector<double> parse_directions(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad direction '" + tok + "'");
    }
  }
  return out;
}

// ---- synth ----

struct SynthArgs {
  std::string directions = "0,22.5,45";
  int runs = 2;
  int snapshots = 2000;
  double fluct_scale = 0.1;
  double corr_len = 3.0;
};

void cmd_synth(const Globals& g, const SynthArgs& a) {
  if (a.runs < 1) throw ConfigError("--runs must be positive");
  for (double d : parse_directions(a.directions))
    for (int run = 1; run <= a.runs; ++run) {
      SynthConfig c;
      c.direction = d;
      c.n_snapshots = a.snapshots;
      c.fluct_scale = a.fluct_scale;
      c.corr_len = a.corr_len;
      c.run_index = run;
      c.seed = synth_run_seed(g.seed, d, run);
      const auto r = synth_realization(c);
      const auto path = save_realization(r, g.out, realization_stem(r));
      log_line(g, "wrote " + path.string());
    }
}

// ---- place ----

struct PlaceArgs {
  std::string data;
  std::string placement = "uniform";
  std::string split = "mdt";
  int k = 5;
  int modes = kDefaultPodModes;
};

void cmd_place(const Globals& g, const PlaceArgs& a) {
  const auto p = bench::parse_placement(a.placement);
  SensorLayout layout;
  if (bench::nominal_of(p) == bench::Placement::Qr) {
    if (a.data.empty()) throw ConfigError("QR placement needs --data");
    bench::BenchConfig cfg;
    cfg.seed = g.seed;
    cfg.pod_modes = a.modes;
    bench::BenchData data(load_dataset(a.data), cfg);
    layout = data.nominal_layout(bench::parse_strategy(a.split), p, a.k);
  } else {
    layout = uniform_layout(kReferenceGrid, a.k, mix_seed(g.seed, static_cast<std::uint64_t>(a.k)));
  }
  if (bench::is_perturbed(p)) layout = perturb_layout(layout, mix_seed(g.seed ^ 0x7065727475726221ULL, a.k));
  fs::path out = g.out;
  if (out.extension() != ".json") out /= "layout_" + a.placement + "_k" + std::to_string(a.k) + ".json";
  save_layout(layout, out, a.placement, g.seed);
  log_line(g, "wrote " + out.string());
}

// ---- train ----

struct TrainArgs {
  std::string arch = "unet";
  std::string split = "mdt";
  std::string layout;
  std::string data;
};

template <class T>
void train_with(const Globals& g, const TrainArgs& a, const nlohmann::json& cfg_json) {
  const auto arch = nn::parse_arch(a.arch);
  auto spec = nn::default_spec(arch);
  auto tc = nn::TrainConfig::for_arch(arch);
  int train_samples = 0;
  tc.seed = g.seed;
  try {
    for (auto it = cfg_json.begin(); it != cfg_json.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "lr") tc.lr = v.get<double>();
      else if (k == "max_epochs") tc.max_epochs = v.get<int>();
      else if (k == "batch_size") tc.batch_size = v.get<int>();
      else if (k == "patience") tc.patience = v.get<int>();
      else if (k == "val_fraction") tc.val_fraction = v.get<double>();
      else if (k == "critic_steps") tc.critic_steps = v.get<int>();
      else if (k == "l1_weight") tc.l1_weight = v.get<double>();
      else if (k == "clip") tc.clip = v.get<double>();
      else if (k == "width_divisor") spec = nn::narrowed(spec, v.get<int>());
      else if (k == "train_samples") train_samples = v.get<int>();
      else if (k == "spec") spec = nn::spec_from_json(v);
      else throw ConfigError("unknown training setting '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training config: ") + e.what());
  }
  tc.validate();
  if (a.data.empty()) throw ConfigError("--data is required");
  if (a.layout.empty()) throw ConfigError("--layout is required");
  const auto runs = load_dataset(a.data);
  const auto plan = bench::build_split(runs, bench::parse_strategy(a.split));
  const auto layout = load_layout(a.layout);
  std::vector<const Realization*> train_runs;
  std::size_t total = 0;
  for (std::size_t i : plan.train) {
    train_runs.push_back(&runs[i]);
    total += runs[i].snapshots.size();
  }
  const int stride =
      train_samples > 0 ? static_cast<int>(std::max<std::size_t>(1, (total + train_samples - 1) / train_samples)) : 1;
  const auto set = nn::make_training_set(train_runs, layout, stride);
  nn::Model<T> model(spec, g.seed);
  log_line(g, "training " + a.arch + " (" + std::to_string(model.param_count()) + " parameters) on " +
                  std::to_string(set.size()) + " snapshots");
  const auto res = nn::train(model, set, tc, [&](const nn::EpochRecord& e) {
    log_line(g, "epoch " + std::to_string(e.epoch) + " train " + bench::fmt(e.train_loss, 6) + " val " +
                    bench::fmt(e.val_loss, 6));
    return true;
  });
  nlohmann::ordered_json extra;
  extra["epochs_run"] = res.history.size();
  extra["best_epoch"] = res.best_epoch;
  extra["best_val_mse"] = res.best_val;
  extra["split"] = a.split;
  extra["layout"] = layout_to_json(layout);
  auto hist = nlohmann::ordered_json::array();
  for (const auto& e : res.history) hist.push_back({e.epoch, e.train_loss, e.val_loss, e.lr});
  extra["history"] = hist;
  fs::path stem = fs::path(g.out) / a.arch;
  const auto meta = nn::save_checkpoint(model, stem, extra);
  log_line(g, "wrote " + meta.string());
}

// ---- reconstruct ----

struct ReconstructArgs {
  std::string input;
  std::string layout;
  std::string checkpoint;
  std::string calibration;
  int members = 1;
};

template <class T>
std::vector<VelocityField> learned_reconstruct(const std::string& ckpt, const SensorLayout& layout,
                                               const Realization& r, int members, std::uint64_t seed) {
  auto model = nn::load_checkpoint<T>(ckpt);
  std::vector<double> inputs;
  std::vector<std::uint64_t> seeds;
  for (std::size_t t = 0; t < r.snapshots.size(); ++t) {
    const auto in = nn::encode_input(layout, r.snapshots[t]);
    inputs.insert(inputs.end(), in.values.begin(), in.values.end());
    seeds.push_back(nn::sample_noise_seed(seed, t));
  }
  return nn::predict_many(*model, inputs, layout.grid(), seeds, members);
}

void cmd_reconstruct(const Globals& g, const ReconstructArgs& a) {
  if (a.input.empty() || a.layout.empty()) throw ConfigError("--input and --layout are required");
  const auto r = load_realization(a.input);
  const auto layout = load_layout(a.layout);
  Realization out = r;
  if (a.checkpoint.empty()) {
    const auto calib_run = a.calibration.empty() ? r : load_realization(a.calibration);
    std::vector<VelocityField> calib;
    const std::size_t n = calib_run.snapshots.size();
    const std::size_t m = std::min<std::size_t>(n, kCalibrationSnapshots);
    for (std::size_t i = 0; i < m; ++i) calib.push_back(calib_run.snapshots[i * n / m]);
    const auto model = select_length(layout, calib);
    log_line(g, "kriging lengths u=" + bench::fmt(model[0].length, 6) + " v=" + bench::fmt(model[1].length, 6));
    const KrigingReconstructor rec(layout, model);
    for (std::size_t t = 0; t < r.snapshots.size(); ++t) out.snapshots[t] = rec.reconstruct(layout.read(r.snapshots[t]));
  } else {
    out.snapshots = bench::parse_precision(g.precision) == bench::Precision::F32
                        ? learned_reconstruct<float>(a.checkpoint, layout, r, a.members, g.seed)
                        : learned_reconstruct<double>(a.checkpoint, layout, r, a.members, g.seed);
  }
  for (const auto& f : out.snapshots)
    if (!f.all_finite()) throw NumericalError("non-finite reconstruction");
  const auto path = save_realization(out, g.out, realization_stem(r) + "_reconstructed");
  log_line(g, "wrote " + path.string());
}

// ---- eval ----

struct EvalArgs {
  std::string truth;
  std::string pred;
  double w = kFac2Tolerance;
};

void cmd_eval(const Globals& g, const EvalArgs& a) {
  if (a.truth.empty() || a.pred.empty()) throw ConfigError("--truth and --pred are required");
  const auto truth = load_realization(a.truth);
  const auto pred = load_realization(a.pred);
  if (truth.snapshots.size() != pred.snapshots.size() || !(truth.grid() == pred.grid()))
    throw DataError("truth and prediction datasets differ in shape");
  const auto ranges = component_ranges(truth.snapshots);
  const std::pair<double, double> rg{ranges.first > 0 ? ranges.first : 1.0, ranges.second > 0 ? ranges.second : 1.0};
  std::string csv = "scope,t,ssim,mg,nmse,fac2,ssim_u,ssim_v,mg_u,mg_v,nmse_u,nmse_v,fac2_u,fac2_v,mg_points\n";
  auto line = [](const std::string& scope, const std::string& t, const MetricReport& r) {
    auto f = bench::metric_fields(r, 12);
    f.insert(f.begin(), {scope, t});
    return bench::join(f) + "\n";
  };
  const auto agg = evaluate_pooled(pred.snapshots, truth.snapshots, a.w, rg);
  csv += line("aggregate", "", agg);
  for (std::size_t t = 0; t < truth.snapshots.size(); ++t)
    csv += line("snapshot", std::to_string(t), evaluate(pred.snapshots[t], truth.snapshots[t], a.w, rg));
  fs::path out = g.out;
  if (out.extension() != ".csv") out /= "metrics.csv";
  bench::write_text(out, csv);
  std::printf("ssim %s mg %s nmse %s fac2 %s\n", bench::fmt(agg.ssim, 6).c_str(), bench::fmt(agg.mg, 6).c_str(),
              bench::fmt(agg.nmse, 6).c_str(), bench::fmt(agg.fac2, 6).c_str());
}

// ---- bench ----

bench::BenchConfig bench_config(const Globals& g, bool desk) {
  bench::BenchConfig cfg = desk ? bench::BenchConfig::desk_scale() : bench::BenchConfig{};
  if (!g.config.empty()) cfg = bench::BenchConfig::from_json(read_json(g.config), cfg);
  if (g.seed_set) cfg.seed = g.seed;
  if (g.precision_set) cfg.precision = bench::parse_precision(g.precision);
  cfg.validate();
  return cfg;
}

struct BenchArgs {
  std::string data;
  std::string results;
  std::string run_dir;
  bool desk = false;
  std::string split = "mdt";
  std::string placement = "uniform";
  int k = 30;
  int window = 10;
  std::string realization;
  double direction = 0.0;
  std::vector<std::string> methods = {"kriging", "unet", "cwgan", "vitae"};
};

void cmd_bench_run(const Globals& g, const BenchArgs& a) {
  if (a.data.empty()) throw ConfigError("--data is required");
  const auto cfg = bench_config(g, a.desk);
  bench::BenchData data(load_dataset(a.data), cfg);
  const auto cells = bench::matrix_cells(cfg);
  const auto results = bench::run_matrix(cells, data, g.out, [&](const std::string& s) { log_line(g, s); });
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.ok();
  log_line(g, std::to_string(results.size()) + " cells, " + std::to_string(failed) + " failed; wrote " +
                  (fs::path(g.out) / "results.csv").string());
}

void cmd_bench_report(const Globals& g, const BenchArgs& a) {
  const fs::path results = !a.results.empty() ? fs::path(a.results) : fs::path(a.run_dir) / "results.csv";
  const auto rows = bench::read_results(results);
  const auto files = bench::report(rows, g.out);
  for (const auto& n : files.notes) log_line(g, "note: " + n);
  log_line(g, "wrote " + std::to_string(files.metric_files.size()) + " metric files and " + files.summary.string());
}

/// Evaluates the perturbed counterparts of the run's nominal cells (reusing
/// cached models), then writes robustness.csv.
void cmd_bench_robustness(const Globals& g, const BenchArgs& a) {
  if (a.data.empty() || a.run_dir.empty()) throw ConfigError("--data and --run-dir are required");
  const auto run_json = read_json((fs::path(a.run_dir) / "run.json").string());
  const auto cfg = bench::BenchConfig::from_json(run_json.at("config"));
  bench::BenchData data(load_dataset(a.data), cfg);
  auto rows = bench::read_results(fs::path(a.run_dir) / "results.csv");
  std::vector<bench::BenchCell> missing;
  for (const auto& r : rows) {
    if (bench::is_perturbed(r.cell.placement)) continue;
    bench::BenchCell c = r.cell;
    c.placement = r.cell.placement == bench::Placement::Uniform ? bench::Placement::Perturbed
                                                                : bench::Placement::QrPerturbed;
    const bool present = std::any_of(rows.begin(), rows.end(), [&](const auto& x) { return x.cell == c; });
    if (!present) missing.push_back(c);
  }
  if (!missing.empty()) {
    const auto extra = bench::run_matrix(missing, data, fs::path(a.run_dir) / "robustness_cells",
                                         [&](const std::string& s) { log_line(g, s); });
    for (const auto& r : bench::aggregate_rows(extra)) rows.push_back(r);
  }
  const auto table = bench::robustness_table(rows);
  fs::path out = g.out;
  if (out.extension() != ".csv") out /= "robustness.csv";
  bench::write_text(out, bench::robustness_csv(table));
  log_line(g, "wrote " + out.string());
}

template <class T>
bench::BatchReconstructor model_reconstructor(std::shared_ptr<nn::Model<T>> model, const SensorLayout& nominal,
                                              const bench::BenchConfig& cfg) {
  return [model, nominal, cfg](const std::vector<std::vector<double>>& readings) {
    return bench::learned_predictions(*model, nominal, readings, cfg, 1);
  };
}

void cmd_bench_averaging(const Globals& g, const BenchArgs& a) {
  if (a.data.empty() || a.run_dir.empty()) throw ConfigError("--data and --run-dir are required");
  const auto run_json = read_json((fs::path(a.run_dir) / "run.json").string());
  auto cfg = bench::BenchConfig::from_json(run_json.at("config"));
  bench::BenchData data(load_dataset(a.data), cfg);
  const auto split = bench::parse_strategy(a.split);
  const auto placement = bench::parse_placement(a.placement);
  const auto nominal = data.nominal_layout(split, placement, a.k);
  const auto actual = data.actual_layout(split, placement, a.k);
  const auto& plan = data.plan(split);
  std::vector<std::size_t> targets;
  for (std::size_t i : plan.test)
    if (a.realization.empty() || data.runs()[i].label() == a.realization) targets.push_back(i);
  if (targets.empty()) throw DataError("no matching test realization");

  std::string csv = "method,split,placement,k,realization,window,groups,pipeline,ssim,mg,nmse,fac2\n";
  for (const auto& mname : a.methods) {
    const auto m = bench::parse_method(mname);
    bench::BatchReconstructor rec;
    if (m == bench::Method::Kriging) {
      const auto model = data.kriging_model(split, placement, a.k);
      auto kr = std::make_shared<KrigingReconstructor>(nominal, model);
      rec = [kr](const std::vector<std::vector<double>>& rs) {
        std::vector<VelocityField> out;
        for (const auto& r : rs) out.push_back(kr->reconstruct(r));
        return out;
      };
    } else {
      nlohmann::ordered_json prov;
      const auto models_dir = fs::path(a.run_dir) / "models";
      if (cfg.precision == bench::Precision::F32)
        rec = model_reconstructor<float>(
            bench::obtain_model<float>(data, m, split, placement, a.k, models_dir, prov,
                                       [&](const std::string& s) { log_line(g, s); }),
            nominal, cfg);
      else
        rec = model_reconstructor<double>(
            bench::obtain_model<double>(data, m, split, placement, a.k, models_dir, prov,
                                        [&](const std::string& s) { log_line(g, s); }),
            nominal, cfg);
    }
    for (std::size_t i : targets) {
      const auto& run = data.runs()[i];
      const auto pair = bench::averaging_compare(rec, actual, run, a.window, cfg.fac2_w, data.ranges(split));
      for (const auto& [name, rep] : {std::pair{"post", pair.post}, std::pair{"pre", pair.pre}})
        csv += bench::join({mname, a.split, a.placement, std::to_string(a.k), run.label(), std::to_string(a.window),
                            std::to_string(pair.groups), name, bench::fmt(rep.ssim), bench::fmt(rep.mg),
                            bench::fmt(rep.nmse), bench::fmt(rep.fac2)}) +
               "\n";
    }
  }
  fs::path out = g.out;
  if (out.extension() != ".csv") out /= "averaging.csv";
  bench::write_text(out, csv);
  log_line(g, "wrote " + out.string());
}

void cmd_bench_similarity(const Globals& g, const BenchArgs& a) {
  if (a.data.empty()) throw ConfigError("--data is required");
  const auto runs = load_dataset(a.data);
  std::vector<Realization> same;
  for (const auto& r : runs)
    if (r.direction_deg == a.direction) same.push_back(r);
  const auto m = bench::realization_similarity(same);
  fs::path out = g.out;
  if (out.extension() != ".csv") out /= "similarity_" + format_direction(a.direction) + ".csv";
  bench::write_text(out, bench::similarity_csv(m));
  std::printf("mean ssim %s over %zu realizations\n", bench::fmt(bench::mean_similarity(m), 6).c_str(), same.size());
}

int run(int argc, char** argv) {
  CLI::App app{"Sparse-sensor reconstruction of rooftop wind fields"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed")->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--out", g.out, "Output directory or file");
  app.add_option("--precision", g.precision, "Engine precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->each([&](const std::string&) { g.precision_set = true; });
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate synthetic realizations");
  synth->add_option("--directions", sa.directions, "Comma-separated wind directions (degrees)");
  synth->add_option("--runs", sa.runs, "Realizations per direction");
  synth->add_option("--snapshots", sa.snapshots, "Snapshots per realization");
  synth->add_option("--fluct-scale", sa.fluct_scale, "Fluctuation scale");
  synth->add_option("--corr-len", sa.corr_len, "Noise correlation length (cells)");

  PlaceArgs pa;
  auto* place = app.add_subcommand("place", "Compute a sensor layout");
  place->add_option("--k", pa.k, "Number of sensors")->required();
  place->add_option("--placement,--method", pa.placement, "uniform | perturbed | qr | qr_perturbed");
  place->add_option("--data", pa.data, "Dataset directory (for qr)");
  place->add_option("--split", pa.split, "Split whose training data defines the POD basis");
  place->add_option("--modes", pa.modes, "POD modes");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a reconstruction model");
  train->add_option("--arch", ta.arch, "unet | cwgan | vitae")->check(CLI::IsMember({"unet", "cwgan", "vitae"}));
  train->add_option("--split", ta.split, "sdt | mdt");
  train->add_option("--layout", ta.layout, "Layout JSON");
  train->add_option("--data", ta.data, "Dataset directory");

  ReconstructArgs ra;
  auto* recon = app.add_subcommand("reconstruct", "Reconstruct fields from sensor readings");
  recon->add_option("--input", ra.input, "Realization JSON providing readings");
  recon->add_option("--layout", ra.layout, "Layout JSON");
  recon->add_option("--checkpoint", ra.checkpoint, "Model checkpoint (omit for Kriging)");
  recon->add_option("--calibration", ra.calibration, "Realization used to fit Kriging lengths");
  recon->add_option("--members", ra.members, "Ensemble size for the adversarial model");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score reconstructions against ground truth");
  eval->add_option("--truth", ea.truth, "Ground-truth realization JSON");
  eval->add_option("--pred", ea.pred, "Reconstructed realization JSON");
  eval->add_option("--w", ea.w, "FAC2 small-value tolerance");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark matrix and analyses");
  bench_cmd->require_subcommand(1);
  auto* brun = bench_cmd->add_subcommand("run", "Run (or resume) the benchmark matrix");
  brun->add_option("--data", ba.data, "Dataset directory");
  brun->add_flag("--desk", ba.desk, "Reduced single-core budget");
  auto* breport = bench_cmd->add_subcommand("report", "Plot data and summary from results.csv");
  breport->add_option("--results", ba.results, "results.csv");
  breport->add_option("--run-dir", ba.run_dir, "Benchmark output directory");
  auto* brob = bench_cmd->add_subcommand("robustness", "Retention under sensor perturbation");
  brob->add_option("--data", ba.data, "Dataset directory");
  brob->add_option("--run-dir", ba.run_dir, "Benchmark output directory");
  auto* bavg = bench_cmd->add_subcommand("averaging", "Pre- vs post-averaging comparison");
  bavg->add_option("--data", ba.data, "Dataset directory");
  bavg->add_option("--run-dir", ba.run_dir, "Benchmark output directory");
  bavg->add_option("--split", ba.split, "sdt | mdt");
  bavg->add_option("--placement", ba.placement, "Placement");
  bavg->add_option("--k", ba.k, "Number of sensors");
  bavg->add_option("--window", ba.window, "Snapshots per averaging window");
  bavg->add_option("--realization", ba.realization, "Test realization label (default: all)");
  bavg->add_option("--methods", ba.methods, "Methods to compare")->delimiter(',');
  auto* bsim = bench_cmd->add_subcommand("similarity", "Pairwise SSIM of realization mean speeds");
  bsim->add_option("--data", ba.data, "Dataset directory");
  bsim->add_option("--direction", ba.direction, "Wind direction (degrees)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*synth) cmd_synth(g, sa);
  else if (*place) cmd_place(g, pa);
  else if (*train) {
    const auto cfg = g.config.empty() ? nlohmann::json::object() : read_json(g.config);
    if (bench::parse_precision(g.precision) == bench::Precision::F32)
      train_with<float>(g, ta, cfg);
    else
      train_with<double>(g, ta, cfg);
  } else if (*recon) cmd_reconstruct(g, ra);
  else if (*eval) cmd_eval(g, ea);
  else if (*brun) cmd_bench_run(g, ba);
  else if (*breport) cmd_bench_report(g, ba);
  else if (*brob) cmd_bench_robustness(g, ba);
  else if (*bavg) cmd_bench_averaging(g, ba);
  else if (*bsim) cmd_bench_similarity(g, ba);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const MetricUndefined& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
