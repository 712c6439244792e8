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

/**
 * @file    cost_model.hpp
 * @brief   Closed-form per-iteration, per-rank costs of the naive and grid
 *          algorithms, and the bandwidth lower bound they are judged against.
 *
 * Every quantity excludes the local NLS solve, whose cost depends on the
 * data through the pivoting sequence; CostEstimate carries a symbolic marker
 * for it instead.
 */

#ifndef HPCNMF_COST_MODEL_HPP
#define HPCNMF_COST_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>

#include "hpcnmf/common.hpp"
#include "hpcnmf/grid.hpp"

namespace hpcnmf {

struct CostEstimate {
  double flops = 0;
  double words = 0;
  double messages = 0;
  double memory_words = 0;
  std::string nls_term;  // e.g. "C_BPP(k=16, c=128)", the unmodeled solve cost
};

/// Dense, or sparse with the nonzero counts the owning rank stores.
struct Density {
  bool sparse = false;
  double nnz_row_block = 0;  // naive: nnz(A_i)
  double nnz_col_block = 0;  // naive: nnz(A^i)
  double nnz_block = 0;      // grid: nnz(A_ij)

  static Density dense() { return {}; }
  static Density sparse_naive(double nnz_rows, double nnz_cols) { return {true, nnz_rows, nnz_cols, 0}; }
  static Density sparse_grid(double nnz_ij) { return {true, 0, 0, nnz_ij}; }
};

namespace detail {

inline std::string nls_marker(double k, double columns) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "C_BPP(k=%.17g, c=%.17g)", k, columns);
  return buf;
}

}  // namespace detail

inline CostEstimate predict_naive(std::size_t m, std::size_t n, std::size_t k, std::size_t p,
                                  const Density& density = Density::dense()) {
  if (p < 1) throw ConfigError("p must be >= 1");
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  const double kd = static_cast<double>(k), pd = static_cast<double>(p);
  CostEstimate e;
  const double gram = (md + nd) * kd * kd;
  e.flops = density.sparse ? 2.0 * (density.nnz_row_block + density.nnz_col_block) * kd + gram
                           : 4.0 * md * nd * kd / pd + gram;
  e.words = (pd - 1.0) * (md + nd) * kd / pd;
  e.messages = 2.0 * static_cast<double>(ceil_log2(p));
  const double data = density.sparse ? density.nnz_row_block + density.nnz_col_block : 2.0 * md * nd / pd;
  e.memory_words = data + (md + nd) * kd / pd + (md + nd) * kd;
  e.nls_term = detail::nls_marker(kd, (md + nd) / pd);
  return e;
}

inline CostEstimate predict_hpc(std::size_t m, std::size_t n, std::size_t k, const GridShape& grid,
                                const Density& density = Density::dense()) {
  const double md = static_cast<double>(m), nd = static_cast<double>(n), kd = static_cast<double>(k);
  const double pr = static_cast<double>(grid.rows), pc = static_cast<double>(grid.cols);
  const double pd = pr * pc;
  CostEstimate e;
  const double gram = (md + nd) * kd * kd / pd;
  e.flops = density.sparse ? 4.0 * density.nnz_block * kd + gram : 4.0 * md * nd * kd / pd + gram;
  e.words = 4.0 * kd * kd * (pd - 1.0) / pd + 2.0 * ((pr - 1.0) * nd * kd / pd + (pc - 1.0) * md * kd / pd);
  e.messages = 4.0 * static_cast<double>(ceil_log2(grid.size())) + 2.0 * static_cast<double>(ceil_log2(grid.cols)) +
               2.0 * static_cast<double>(ceil_log2(grid.rows));
  const double data = density.sparse ? density.nnz_block : md * nd / pd;
  e.memory_words = data + (md + nd) * kd / pd + 2.0 * md * kd / pr + 2.0 * nd * kd / pc;
  e.nls_term = detail::nls_marker(kd, (md + nd) / pd);
  return e;
}

struct LowerBound {
  double words = 0;
  bool assumption_violated = false;  // k ≥ √(mn/p): the bound's hypothesis fails
};

/// min(√(mnk²/p), nk) with the dimensions ordered so that m ≥ n; the
/// asymptotic constant is dropped.
inline LowerBound bandwidth_lower_bound(std::size_t m, std::size_t n, std::size_t k, std::size_t p) {
  if (p < 1) throw ConfigError("p must be >= 1");
  if (m < n) std::swap(m, n);
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  const double kd = static_cast<double>(k), pd = static_cast<double>(p);
  LowerBound lb;
  if (k == 0) return lb;
  lb.words = std::min(std::sqrt(md * nd * kd * kd / pd), nd * kd);
  lb.assumption_violated = kd >= std::sqrt(md * nd / pd);
  return lb;
}

}  // namespace hpcnmf

#endif  // HPCNMF_COST_MODEL_HPP
