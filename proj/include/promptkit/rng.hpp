#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

namespace promptkit {

// All randomness in the toolkit flows from one root seed through named
// substreams, so individual components (batching, shuffling, init) can be
// replayed without re-running everything that happened before them.
//
// std::mt19937_64 output is fully specified by the standard; the helpers
// below avoid std::*_distribution, whose results are implementation-defined,
// so streams are reproducible across compilers.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Substream seed for (root, name, indices...). Indices make per-repeat or
// per-relation streams independent of how many siblings run before them.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name) {
  return splitmix64(root ^ fnv1a64(name));
}

inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name,
                                    std::uint64_t index) {
  return splitmix64(substream_seed(root, name) ^ splitmix64(index));
}

inline std::mt19937_64 substream(std::uint64_t root, std::string_view name) {
  return std::mt19937_64(substream_seed(root, name));
}

inline std::mt19937_64 substream(std::uint64_t root, std::string_view name,
                                 std::uint64_t index) {
  return std::mt19937_64(substream_seed(root, name, index));
}

// Unbiased integer in [0, n). Lemire-style rejection.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

// Uniform double in (0, 1]; never returns 0 so it is safe under log().
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

// Box-Muller without the cached spare, to keep stream consumption
// position-independent.
inline double gaussian(std::mt19937_64& rng) {
  const double u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

// First k indices of a seeded permutation of [0, n); k >= n yields all of
// them. Used for drawing training batches without replacement.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k,
                                               std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle_in_place(idx, rng);
  if (k < n) idx.resize(k);
  return idx;
}

}  // namespace promptkit
