#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace demoscore {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based random stream. The n-th draw is a pure function of
// (seed, n), so identical (seed, counter) pairs reproduce the same
// sequence on every platform. Substreams hash a domain tag into a new
// seed, which keeps parallel consumers reproducible regardless of
// scheduling order.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  RngStream() = default;
  explicit RngStream(std::uint64_t s) : seed(s) {}

  std::uint64_t next_u64() {
    ++counter;
    return detail::mix64(seed + 0x9e3779b97f4a7c15ULL * counter);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes two draws per value.
  double gaussian() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::vector<double> uniform_vec(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = uniform();
    return out;
  }

  std::vector<double> gaussian_vec(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = gaussian();
    return out;
  }

  RngStream substream(std::string_view tag) const {
    return RngStream(detail::mix64(seed ^ (detail::fnv1a64(tag) | 1)));
  }

  RngStream substream(std::string_view tag, std::uint64_t index) const {
    RngStream s = substream(tag);
    return RngStream(detail::mix64(s.seed + 0x9e3779b97f4a7c15ULL * (index + 1)));
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = next_u64() % i;
      std::swap(idx[i - 1], idx[j]);
    }
    return idx;
  }
};

}  // namespace demoscore
