#pragma once

// Minimal CSV emit/parse for the benchmark tables (no quoting needed: no
// field ever contains a comma or newline).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rooftop/errors.hpp"

namespace rooftop::bench {

/// Fixed-format number: 12 significant digits, "nan"/"inf" spelled out.
inline std::string fmt(double v, int digits = 12) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v, int digits = 12) { return v ? fmt(*v, digits) : ""; }

inline std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw DataError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw DataError("bad number '" + s + "'");
  }
}

inline std::string join(const std::vector<std::string>& f) {
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) out += ',';
    out += f[i];
  }
  return out;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw DataError("missing CSV column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV " + path.string());
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != t.header.size()) throw DataError("ragged CSV row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace rooftop::bench
