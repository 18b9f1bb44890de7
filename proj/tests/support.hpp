#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "rooftop/field.hpp"

namespace testing_support {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("rooftop_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline rooftop::VelocityField random_field(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                           rooftop::GridSpec g = rooftop::kReferenceGrid) {
  std::uniform_real_distribution<double> d(lo, hi);
  rooftop::VelocityField f(g);
  for (double& v : f.raw()) v = d(rng);
  return f;
}

}  // namespace testing_support
