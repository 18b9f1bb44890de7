#pragma once

// Plot-data CSVs (score vs k, one series per method/placement) and a
// markdown summary. Output depends only on the result rows.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rooftop/bench/analysis.hpp"
#include "rooftop/bench/csv.hpp"

namespace rooftop::bench {

struct ReportFiles {
  std::vector<std::filesystem::path> metric_files;
  std::filesystem::path summary;
  std::vector<std::string> notes;
};

namespace detail {

struct SeriesTable {
  std::vector<int> ks;
  std::vector<std::string> series;  // "<method>_<placement>"
  std::map<std::pair<std::string, int>, std::optional<double>> values;
  std::vector<std::string> omitted;
};

inline SeriesTable series_table(const std::vector<ResultRow>& rows, Strategy split, MetricId metric) {
  SeriesTable t;
  std::set<int> ks;
  std::vector<std::pair<Method, Placement>> order;
  for (const auto& r : rows) {
    if (r.cell.split != split) continue;
    ks.insert(r.cell.k);
    const std::pair key{r.cell.method, r.cell.placement};
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
  }
  std::sort(order.begin(), order.end());
  t.ks.assign(ks.begin(), ks.end());
  for (const auto& [m, p] : order) {
    const std::string name = to_string(m) + "_" + to_string(p);
    bool any = false;
    for (const auto& r : rows) {
      if (r.cell.split != split || r.cell.method != m || r.cell.placement != p) continue;
      const auto v = r.status == "ok" ? metric_value(r.report, metric) : std::nullopt;
      t.values[{name, r.cell.k}] = v;
      any = any || v.has_value();
    }
    if (any)
      t.series.push_back(name);
    else
      t.omitted.push_back(name);
  }
  return t;
}

}  // namespace detail

/// Writes <metric>_<split>.csv for every metric and split present, plus
/// summary.md.
inline ReportFiles report(const std::vector<ResultRow>& rows, const std::filesystem::path& out_dir) {
  if (rows.empty()) throw DataError("no results to report");
  ReportFiles files;
  std::set<Strategy> splits;
  for (const auto& r : rows) splits.insert(r.cell.split);

  std::string md = "# Benchmark summary\n\n";
  std::size_t ok = 0;
  for (const auto& r : rows) ok += r.status == "ok";
  md += std::to_string(rows.size()) + " cells, " + std::to_string(ok) + " completed.\n";

  for (Strategy s : splits) {
    md += "\n## Split " + to_string(s) + "\n";
    for (MetricId m : kMetrics) {
      const auto t = detail::series_table(rows, s, m);
      std::vector<std::string> head = {"k"};
      head.insert(head.end(), t.series.begin(), t.series.end());
      std::string csv = join(head) + "\n";
      std::string table = "| " + join(head) + " |\n|";
      for (std::size_t i = 0; i < head.size(); ++i) table += "---|";
      table += "\n";
      for (int k : t.ks) {
        std::vector<std::string> f = {std::to_string(k)};
        for (const auto& name : t.series) {
          const auto it = t.values.find({name, k});
          f.push_back(it == t.values.end() ? "" : fmt(it->second, 6));
        }
        csv += join(f) + "\n";
        std::string line = "| ";
        for (std::size_t i = 0; i < f.size(); ++i) line += (i ? " | " : "") + (f[i].empty() ? "-" : f[i]);
        table += line + " |\n";
      }
      const auto path = out_dir / (to_string(m) + "_" + to_string(s) + ".csv");
      write_text(path, csv);
      files.metric_files.push_back(path);
      md += "\n### " + to_string(m) + "\n\n" + table;
      for (const auto& name : t.omitted) {
        const std::string note = to_string(m) + "/" + to_string(s) + ": series " + name + " omitted (no defined values)";
        files.notes.push_back(note);
        md += "\nNote: " + note + ".\n";
      }
    }
  }

  bool has_perturbed = false;
  for (const auto& r : rows) has_perturbed = has_perturbed || is_perturbed(r.cell.placement);
  if (has_perturbed) {
    try {
      const auto rob = robustness_table(rows);
      md += "\n## Retention under perturbation (%)\n\n| method | split | ssim | mg | nmse | fac2 | overall |\n"
            "|---|---|---|---|---|---|---|\n";
      for (const auto& r : rob) {
        md += "| " + to_string(r.method) + " | " + to_string(r.split);
        for (MetricId id : kMetrics) md += " | " + (r.standard.at(id) ? fmt(*r.standard.at(id), 5) : "-");
        md += " | " + (r.standard_overall ? fmt(*r.standard_overall, 5) : "-") + " |\n";
      }
    } catch (const DataError& e) {
      md += "\nRetention table skipped: " + std::string(e.what()) + "\n";
    }
  }
  files.summary = out_dir / "summary.md";
  write_text(files.summary, md);
  return files;
}

}  // namespace rooftop::bench
