#pragma once

// Post-run analyses: perturbation retention, pre- vs post-averaging, and
// similarity between realizations of one direction.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rooftop/bench/config.hpp"
#include "rooftop/bench/csv.hpp"
#include "rooftop/bench/matrix.hpp"
#include "rooftop/field.hpp"
#include "rooftop/metrics.hpp"

namespace rooftop::bench {

/// One aggregated result, as read back from results.csv.
struct ResultRow {
  BenchCell cell;
  std::string status = "ok";
  std::size_t n = 0;
  MetricReport report;
};

inline std::vector<ResultRow> aggregate_rows(const std::vector<CellResult>& results) {
  std::vector<ResultRow> out;
  for (const auto& r : results) out.push_back({r.cell, r.status, r.n_snapshots, r.aggregate});
  return out;
}

inline std::vector<ResultRow> read_results(const std::filesystem::path& csv) {
  const auto t = read_csv(csv);
  if (t.header != result_columns()) throw DataError("unexpected results header in " + csv.string());
  std::vector<ResultRow> out;
  for (const auto& f : t.rows) {
    if (f[0] != "aggregate") continue;
    ResultRow r;
    r.cell = {parse_method(f[1]), parse_strategy(f[2]), parse_placement(f[3]), std::stoi(f[4])};
    r.status = f[7];
    r.n = f[8].empty() ? 0 : std::stoull(f[8]);
    if (r.status == "ok") r.report = parse_metric_fields(f, 9);
    out.push_back(r);
  }
  return out;
}

enum class MetricId { Ssim, Mg, Nmse, Fac2 };
inline constexpr MetricId kMetrics[] = {MetricId::Ssim, MetricId::Mg, MetricId::Nmse, MetricId::Fac2};

inline std::string to_string(MetricId m) {
  switch (m) {
    case MetricId::Ssim: return "ssim";
    case MetricId::Mg: return "mg";
    case MetricId::Nmse: return "nmse";
    case MetricId::Fac2: return "fac2";
  }
  return "?";
}

inline std::optional<double> metric_value(const MetricReport& r, MetricId m) {
  switch (m) {
    case MetricId::Ssim: return r.ssim;
    case MetricId::Mg: return r.mg;
    case MetricId::Nmse: return r.nmse;
    case MetricId::Fac2: return r.fac2;
  }
  return std::nullopt;
}

/// 100 * (perturbed / unperturbed) for higher-is-better metrics; NMSE and
/// |1 - MG| are lower-is-better, so the ratio is inverted. Equal scores give
/// exactly 100. Undefined when a denominator vanishes.
inline std::optional<double> retention(MetricId m, double unperturbed, double perturbed) {
  if (unperturbed == perturbed) return 100.0;
  double num = perturbed, den = unperturbed;
  if (m == MetricId::Nmse) {
    num = unperturbed;
    den = perturbed;
  } else if (m == MetricId::Mg) {
    num = std::abs(1.0 - unperturbed);
    den = std::abs(1.0 - perturbed);
  }
  if (den == 0.0 || !std::isfinite(num / den)) return std::nullopt;
  return 100.0 * num / den;
}

struct RobustnessRow {
  Method method = Method::Kriging;
  Strategy split = Strategy::Mdt;
  std::map<MetricId, std::optional<double>> standard;  // uniform -> perturbed
  std::map<MetricId, std::optional<double>> qr;        // qr -> qr_perturbed
  std::optional<double> standard_overall;
  std::optional<double> qr_overall;

  [[nodiscard]] std::optional<double> improvement(MetricId m) const {
    const auto a = standard.at(m), b = qr.at(m);
    if (!a || !b) return std::nullopt;
    return *b - *a;
  }
  [[nodiscard]] std::optional<double> overall_improvement() const {
    if (!standard_overall || !qr_overall) return std::nullopt;
    return *qr_overall - *standard_overall;
  }
};

/// Retention per (method, split), averaged over the sensor counts present
/// in both the nominal and perturbed results. Missing counterparts are an
/// error; a placement family with no rows at all is left empty.
inline std::vector<RobustnessRow> robustness_table(const std::vector<ResultRow>& rows) {
  std::map<std::tuple<int, int, int, int>, const ResultRow*> idx;
  std::vector<std::pair<Method, Strategy>> groups;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    idx[{static_cast<int>(r.cell.method), static_cast<int>(r.cell.split), static_cast<int>(r.cell.placement),
         r.cell.k}] = &r;
    const std::pair g{r.cell.method, r.cell.split};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  std::sort(groups.begin(), groups.end());

  auto family = [&](Method m, Strategy s, Placement nominal, Placement perturbed,
                    std::map<MetricId, std::optional<double>>& out) -> std::optional<double> {
    std::vector<int> ks;
    bool any = false;
    for (const auto& [key, r] : idx) {
      if (std::get<0>(key) != static_cast<int>(m) || std::get<1>(key) != static_cast<int>(s)) continue;
      if (std::get<2>(key) == static_cast<int>(nominal) || std::get<2>(key) == static_cast<int>(perturbed)) any = true;
      if (std::get<2>(key) != static_cast<int>(nominal)) continue;
      if (!idx.count({static_cast<int>(m), static_cast<int>(s), static_cast<int>(perturbed), std::get<3>(key)}))
        throw DataError("missing " + to_string(perturbed) + " counterpart for " + r->cell.id());
      ks.push_back(std::get<3>(key));
    }
    for (const auto& [key, r] : idx)
      if (std::get<0>(key) == static_cast<int>(m) && std::get<1>(key) == static_cast<int>(s) &&
          std::get<2>(key) == static_cast<int>(perturbed) &&
          !idx.count({static_cast<int>(m), static_cast<int>(s), static_cast<int>(nominal), std::get<3>(key)}))
        throw DataError("missing " + to_string(nominal) + " counterpart for " + r->cell.id());
    for (MetricId id : kMetrics) out[id] = std::nullopt;
    if (!any) return std::nullopt;
    std::vector<double> per_metric_means;
    bool all_defined = true;
    for (MetricId id : kMetrics) {
      double sum = 0.0;
      int n = 0;
      bool defined = true;
      for (int k : ks) {
        const auto* a = idx.at({static_cast<int>(m), static_cast<int>(s), static_cast<int>(nominal), k});
        const auto* b = idx.at({static_cast<int>(m), static_cast<int>(s), static_cast<int>(perturbed), k});
        const auto va = metric_value(a->report, id), vb = metric_value(b->report, id);
        const auto ret = (va && vb) ? retention(id, *va, *vb) : std::nullopt;
        if (!ret) {
          defined = false;
          break;
        }
        sum += *ret;
        ++n;
      }
      if (defined && n > 0) {
        out[id] = sum / n;
        per_metric_means.push_back(sum / n);
      } else {
        all_defined = false;
      }
    }
    if (!all_defined || per_metric_means.empty()) return std::nullopt;
    double s2 = 0.0;
    for (double v : per_metric_means) s2 += v;
    return s2 / static_cast<double>(per_metric_means.size());
  };

  std::vector<RobustnessRow> out;
  for (const auto& [m, s] : groups) {
    RobustnessRow row;
    row.method = m;
    row.split = s;
    row.standard_overall = family(m, s, Placement::Uniform, Placement::Perturbed, row.standard);
    row.qr_overall = family(m, s, Placement::Qr, Placement::QrPerturbed, row.qr);
    out.push_back(row);
  }
  return out;
}

inline std::string robustness_csv(const std::vector<RobustnessRow>& rows) {
  std::vector<std::string> head = {"method", "split"};
  for (MetricId id : kMetrics) {
    head.push_back(to_string(id) + "_standard");
    head.push_back(to_string(id) + "_qr");
    head.push_back(to_string(id) + "_qr_improvement");
  }
  head.insert(head.end(), {"overall_standard", "overall_qr", "overall_qr_improvement"});
  std::string out = join(head) + "\n";
  for (const auto& r : rows) {
    std::vector<std::string> f = {to_string(r.method), to_string(r.split)};
    for (MetricId id : kMetrics) {
      f.push_back(fmt(r.standard.at(id), 6));
      f.push_back(fmt(r.qr.at(id), 6));
      f.push_back(fmt(r.improvement(id), 6));
    }
    f.push_back(fmt(r.standard_overall, 6));
    f.push_back(fmt(r.qr_overall, 6));
    f.push_back(fmt(r.overall_improvement(), 6));
    out += join(f) + "\n";
  }
  return out;
}

// ---- temporal averaging --------------------------------------------------

/// Maps a batch of sensor readings to reconstructed fields.
using BatchReconstructor = std::function<std::vector<VelocityField>(const std::vector<std::vector<double>>&)>;

struct AveragingPair {
  int window = 1;
  std::size_t groups = 0;
  MetricReport post;  // reconstruct each snapshot, then average
  MetricReport pre;   // average readings, then reconstruct
};

/// Scores both pipelines against window-mean truths. Snapshots past the
/// last full window are dropped.
inline AveragingPair averaging_compare(const BatchReconstructor& reconstruct, const SensorLayout& actual,
                                       const Realization& run, int window, double w = kFac2Tolerance,
                                       std::optional<std::pair<double, double>> ranges = std::nullopt) {
  if (window < 1) throw ConfigError("averaging window must be positive");
  const std::size_t n = run.snapshots.size();
  if (static_cast<std::size_t>(window) > n) throw ConfigError("averaging window larger than the realization");
  const std::size_t groups = n / static_cast<std::size_t>(window);
  const std::size_t used = groups * static_cast<std::size_t>(window);

  std::vector<std::vector<double>> readings;
  for (std::size_t t = 0; t < used; ++t) readings.push_back(actual.read(run.snapshots[t]));
  const auto per_snapshot = reconstruct(readings);

  std::vector<VelocityField> truth_means, post_means;
  std::vector<std::vector<double>> mean_readings;
  const GridSpec g = run.grid();
  for (std::size_t gi = 0; gi < groups; ++gi) {
    VelocityField tm(g), pm(g);
    std::vector<double> rm(readings.front().size(), 0.0);
    for (std::size_t t = gi * window; t < (gi + 1) * window; ++t) {
      for (std::size_t j = 0; j < tm.raw().size(); ++j) {
        tm.raw()[j] += run.snapshots[t].raw()[j];
        pm.raw()[j] += per_snapshot[t].raw()[j];
      }
      for (std::size_t j = 0; j < rm.size(); ++j) rm[j] += readings[t][j];
    }
    for (double& v : tm.raw()) v /= window;
    for (double& v : pm.raw()) v /= window;
    for (double& v : rm) v /= window;
    truth_means.push_back(std::move(tm));
    post_means.push_back(std::move(pm));
    mean_readings.push_back(std::move(rm));
  }
  const auto pre_fields = reconstruct(mean_readings);
  AveragingPair out;
  out.window = window;
  out.groups = groups;
  out.post = evaluate_pooled(post_means, truth_means, w, ranges);
  out.pre = evaluate_pooled(pre_fields, truth_means, w, ranges);
  return out;
}

// ---- realization similarity -------------------------------------------

struct SimilarityMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> ssim;
  std::vector<std::vector<double>> nmse;       // between time-mean speed grids
  std::vector<std::vector<double>> nmse_bias;  // mean-shift share: (mean O - mean P)^2 / (mean O * mean P)
};

/// Pairwise SSIM of time-mean wind-speed grids; the data range is taken
/// over both grids of a pair so the matrix is symmetric.
inline SimilarityMatrix realization_similarity(std::span<const Realization> runs) {
  if (runs.size() < 2) throw DataError("similarity needs at least two realizations");
  std::vector<ScalarGrid> means;
  SimilarityMatrix out;
  for (const auto& r : runs) {
    means.push_back(temporal_statistics(r).ws_mean);
    out.labels.push_back(r.label());
  }
  const std::size_t n = runs.size();
  out.ssim.assign(n, std::vector<double>(n, 1.0));
  out.nmse.assign(n, std::vector<double>(n, 0.0));
  out.nmse_bias.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = means[i];
      const auto& b = means[j];
      const auto [alo, ahi] = std::minmax_element(a.values.begin(), a.values.end());
      const auto [blo, bhi] = std::minmax_element(b.values.begin(), b.values.end());
      double L = std::max(*ahi, *bhi) - std::min(*alo, *blo);
      if (!(L > 0.0)) L = 1.0;
      out.ssim[i][j] = ssim(a, b, L);
      double mo = 0.0, mp = 0.0;
      for (std::size_t c = 0; c < a.values.size(); ++c) {
        mo += a.values[c];
        mp += b.values[c];
      }
      mo /= static_cast<double>(a.values.size());
      mp /= static_cast<double>(b.values.size());
      try {
        out.nmse[i][j] = rooftop::nmse(a.values, b.values);
        out.nmse_bias[i][j] = (mo - mp) * (mo - mp) / (mo * mp);
      } catch (const MetricUndefined&) {
        out.nmse[i][j] = std::nan("");
        out.nmse_bias[i][j] = std::nan("");
      }
      out.ssim[j][i] = out.ssim[i][j];
      out.nmse[j][i] = out.nmse[i][j];
      out.nmse_bias[j][i] = out.nmse_bias[i][j];
    }
  return out;
}

inline std::string similarity_csv(const SimilarityMatrix& m) {
  std::string out = "a,b,ssim,nmse,nmse_bias\n";
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    for (std::size_t j = 0; j < m.labels.size(); ++j)
      out += join({m.labels[i], m.labels[j], fmt(m.ssim[i][j]), fmt(m.nmse[i][j]), fmt(m.nmse_bias[i][j])}) + "\n";
  return out;
}

/// Mean off-diagonal SSIM.
inline double mean_similarity(const SimilarityMatrix& m) {
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    for (std::size_t j = 0; j < m.labels.size(); ++j)
      if (i != j) {
        s += m.ssim[i][j];
        ++c;
      }
  return s / static_cast<double>(c);
}

}  // namespace rooftop::bench
