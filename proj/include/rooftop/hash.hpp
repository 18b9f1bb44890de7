#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace rooftop {

/// 64-bit FNV-1a, used for content fingerprints (cache keys, data identity).
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes) {
    for (std::byte b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(std::as_bytes(std::span(s.data(), s.size()))); }
  template <class T>
  void update_value(const T& v) {
    update(std::as_bytes(std::span(&v, 1)));
  }
  [[nodiscard]] std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

/// SplitMix64 finalizer; derives independent stream seeds from (seed, counter).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace rooftop
