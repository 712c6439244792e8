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

// Shared helpers for the test binaries: seeded random inputs and small
// independent reference computations.

#ifndef HPCNMF_TESTS_SUPPORT_HPP
#define HPCNMF_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "hpcnmf.hpp"

namespace hpcnmf::testing {

inline DenseMatrix random_dense(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = 0.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseMatrix m(r, c);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

/// Dense matrix with roughly `density` of its entries nonzero.
inline DenseMatrix random_sparse_pattern(std::mt19937_64& rng, std::size_t r, std::size_t c, double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DenseMatrix m(r, c);
  for (auto& v : m.data()) v = u(rng) < density ? u(rng) + 0.01 : 0.0;
  return m;
}

/// Naive triple loop in plain double, for cross-checking kernels.
inline DenseMatrix reference_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t l = 0; l < a.cols(); ++l) s += a(i, l) * b(l, j);
      out(i, j) = s;
    }
  return out;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double d = 0;
  for (std::size_t e = 0; e < a.size(); ++e) d = std::max(d, std::abs(a.data()[e] - b.data()[e]));
  return d;
}

inline double max_abs(const DenseMatrix& a) {
  double d = 0;
  for (double v : a.data()) d = std::max(d, std::abs(v));
  return d;
}

inline double relative_diff(const DenseMatrix& x, const DenseMatrix& ref) {
  const double s = max_abs(ref);
  return max_abs_diff(x, ref) / (s > 0 ? s : 1.0);
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(DenseMatrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  return ev;
}

/// Random symmetric positive definite k×k Gram of a tall random factor.
inline DenseMatrix random_spd(std::mt19937_64& rng, std::size_t k) {
  const auto f = random_dense(rng, k + 3, k, -1.0, 1.0);
  return gram(f).matrix;
}

}  // namespace hpcnmf::testing

#endif  // HPCNMF_TESTS_SUPPORT_HPP
