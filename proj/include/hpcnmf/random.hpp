/*
 * Copyright 2026 The hpcnmf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef HPCNMF_RANDOM_HPP
#define HPCNMF_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hpcnmf {

/// Independent value streams of the counter-based generator.
enum class Stream : std::uint64_t {
  FactorH = 1,
  FactorW = 2,
  DenseValue = 3,
  DenseNoise = 4,  // uses 4 and 5
  SparseMask = 6,
  SparseValue = 7,
};

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stateless hash of (seed, stream, row, col); the value at a logical index
/// does not depend on who generates it or in which order.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t row,
                                  std::uint64_t col) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ stream);
  h = mix64(h ^ row);
  return mix64(h ^ (col + 0x632BE59BD9B4E019ULL));
}

/// Top 53 bits of a 64-bit word as a double in [0, 1).
inline double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double counter_uniform(std::uint64_t seed, Stream s, std::uint64_t row, std::uint64_t col) noexcept {
  return unit_interval(counter_hash(seed, static_cast<std::uint64_t>(s), row, col));
}

/// Standard normal via Box–Muller on two counter uniforms.
inline double counter_normal(std::uint64_t seed, Stream s, std::uint64_t row, std::uint64_t col) noexcept {
  const auto base = static_cast<std::uint64_t>(s);
  const double u1 = unit_interval(counter_hash(seed, base, row, col));
  const double u2 = unit_interval(counter_hash(seed, base + 1, row, col));
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// n-th prime (0-based: 2, 3, 5, ...). Used for per-rank seeds.
inline std::uint64_t nth_prime(std::uint64_t n) {
  std::uint64_t count = 0;
  for (std::uint64_t c = 2;; ++c) {
    bool prime = true;
    for (std::uint64_t d = 2; d * d <= c; ++d)
      if (c % d == 0) {
        prime = false;
        break;
      }
    if (prime && count++ == n) return c;
  }
}

}  // namespace hpcnmf

#endif  // HPCNMF_RANDOM_HPP
