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
 * @file    matrix.hpp
 * @brief   Local dense/sparse storage, block partitioning and the four
 *          local kernels of the parallel NMF algorithms.
 *
 * Factor blocks are kept "tall": W blocks are rows×k and H is held as its
 * transpose Hᵀ (columns of H become rows, n_local×k). With that convention
 * both Gram matrices come from the same gram() call and every collective
 * moves contiguous row ranges.
 */

#ifndef HPCNMF_MATRIX_HPP
#define HPCNMF_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hpcnmf/common.hpp"
#include "hpcnmf/grid.hpp"

namespace hpcnmf {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Takes ownership of row-major data. Throws on size mismatch or non-finite values.
  static DenseMatrix from_data(std::size_t rows, std::size_t cols, std::vector<double> data) {
    require(data.size() == rows * cols, "dense data length does not match rows*cols");
    for (double v : data) require(std::isfinite(v), "dense entries must be finite");
    DenseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(data);
    return m;
  }

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      require(row.size() == c, "ragged row list");
      data.insert(data.end(), row.begin(), row.end());
    }
    return from_data(r, c, std::move(data));
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  /// Copy of rows [r.begin, r.end).
  DenseMatrix row_range(Range r) const {
    require(r.end <= rows_ && r.begin <= r.end, "row range out of bounds");
    DenseMatrix out(r.size(), cols_);
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(r.begin * cols_),
              data_.begin() + static_cast<std::ptrdiff_t>(r.end * cols_), out.data_.begin());
    return out;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Coordinate-sorted sparse matrix. Storage is the compressed-row form of the
/// (row, col)-sorted coordinate list, so entries() and the CSR view coincide.
class SparseMatrix {
 public:
  SparseMatrix() : row_ptr_(1, 0) {}
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Sorts by (row, col), drops explicit zeros and rejects duplicates,
  /// out-of-range indices and non-finite values.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> ts) {
    for (const auto& t : ts) {
      require(t.row < rows && t.col < cols, "sparse entry index out of range");
      require(std::isfinite(t.value), "sparse entries must be finite");
    }
    std::sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t e = 1; e < ts.size(); ++e) {
      if (ts[e].row == ts[e - 1].row && ts[e].col == ts[e - 1].col) {
        throw ContractViolation("duplicate sparse entry (" + std::to_string(ts[e].row) + ", " +
                                std::to_string(ts[e].col) + ")");
      }
    }
    SparseMatrix s(rows, cols);
    for (const auto& t : ts) {
      if (t.value == 0.0) continue;
      s.col_idx_.push_back(t.col);
      s.values_.push_back(t.value);
      ++s.row_ptr_[t.row + 1];
    }
    for (std::size_t i = 0; i < rows; ++i) s.row_ptr_[i + 1] += s.row_ptr_[i];
    return s;
  }

  static SparseMatrix from_dense(const DenseMatrix& d) {
    SparseMatrix s(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.rows(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j) {
        if (d(i, j) != 0.0) {
          s.col_idx_.push_back(j);
          s.values_.push_back(d(i, j));
        }
      }
      s.row_ptr_[i + 1] = s.col_idx_.size();
    }
    return s;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  std::vector<Triplet> entries() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e)
        out.push_back({i, col_idx_[e], values_[e]});
    return out;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) d(i, col_idx_[e]) = values_[e];
    return d;
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

using Matrix = std::variant<DenseMatrix, SparseMatrix>;

inline std::size_t rows_of(const Matrix& a) {
  return std::visit([](const auto& m) { return m.rows(); }, a);
}
inline std::size_t cols_of(const Matrix& a) {
  return std::visit([](const auto& m) { return m.cols(); }, a);
}
inline bool is_sparse(const Matrix& a) { return std::holds_alternative<SparseMatrix>(a); }

/// Words needed to hold the matrix locally: r·c dense, nnz sparse.
inline std::size_t stored_words(const Matrix& a) {
  if (const auto* s = std::get_if<SparseMatrix>(&a)) return s->nnz();
  return std::get<DenseMatrix>(a).size();
}

inline DenseMatrix to_dense(const Matrix& a) {
  if (const auto* s = std::get_if<SparseMatrix>(&a)) return s->to_dense();
  return std::get<DenseMatrix>(a);
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// A kernel result together with the flops it cost.
struct Product {
  DenseMatrix matrix;
  std::uint64_t flops = 0;
};

// ---------------------------------------------------------------------------
// Kernels. Every inner sum runs over the contraction index in ascending
// order for both storage types, so dense and sparse results agree bitwise.
// ---------------------------------------------------------------------------

/// A·Hᵀ given Hᵀ as a c×k block.
inline Product matmul_cross_right(const DenseMatrix& a, const DenseMatrix& ht) {
  require(a.cols() == ht.rows(), "matmul_cross_right: inner dimensions differ");
  const std::size_t k = ht.cols();
  DenseMatrix out(a.rows(), k);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      auto hrow = ht.row(j);
      for (std::size_t l = 0; l < k; ++l) orow[l] += aij * hrow[l];
    }
  }
  return {std::move(out), 2ULL * a.rows() * a.cols() * k};
}

inline Product matmul_cross_right(const SparseMatrix& a, const DenseMatrix& ht) {
  require(a.cols() == ht.rows(), "matmul_cross_right: inner dimensions differ");
  const std::size_t k = ht.cols();
  DenseMatrix out(a.rows(), k);
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t e = rp[i]; e < rp[i + 1]; ++e) {
      auto hrow = ht.row(ci[e]);
      for (std::size_t l = 0; l < k; ++l) orow[l] += v[e] * hrow[l];
    }
  }
  return {std::move(out), 2ULL * a.nnz() * k};
}

inline Product matmul_cross_right(const Matrix& a, const DenseMatrix& ht) {
  return std::visit([&](const auto& m) { return matmul_cross_right(m, ht); }, a);
}

/// Wᵀ·A given Wᵀ as a k×r block.
inline Product matmul_cross_left(const DenseMatrix& wt, const DenseMatrix& a) {
  require(wt.cols() == a.rows(), "matmul_cross_left: inner dimensions differ");
  const std::size_t k = wt.rows();
  DenseMatrix out(k, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t l = 0; l < k; ++l) {
      const double w = wt(l, i);
      auto orow = out.row(l);
      for (std::size_t j = 0; j < a.cols(); ++j) orow[j] += w * arow[j];
    }
  }
  return {std::move(out), 2ULL * a.rows() * a.cols() * k};
}

inline Product matmul_cross_left(const DenseMatrix& wt, const SparseMatrix& a) {
  require(wt.cols() == a.rows(), "matmul_cross_left: inner dimensions differ");
  const std::size_t k = wt.rows();
  DenseMatrix out(k, a.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t e = rp[i]; e < rp[i + 1]; ++e) {
      for (std::size_t l = 0; l < k; ++l) out(l, ci[e]) += wt(l, i) * v[e];
    }
  }
  return {std::move(out), 2ULL * a.nnz() * k};
}

inline Product matmul_cross_left(const DenseMatrix& wt, const Matrix& a) {
  return std::visit([&](const auto& m) { return matmul_cross_left(wt, m); }, a);
}

/// FᵀF for an r×k block. Accumulates in long double over the upper triangle
/// and mirrors it, so the result is exactly symmetric.
inline Product gram(const DenseMatrix& f) {
  const std::size_t k = f.cols();
  require(k >= 1, "gram: k must be >= 1");
  std::vector<long double> acc(k * k, 0.0L);
  for (std::size_t r = 0; r < f.rows(); ++r) {
    auto row = f.row(r);
    for (std::size_t a = 0; a < k; ++a) {
      const long double fa = row[a];
      for (std::size_t b = a; b < k; ++b) acc[a * k + b] += fa * row[b];
    }
  }
  DenseMatrix g(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      g(a, b) = static_cast<double>(acc[a * k + b]);
      g(b, a) = g(a, b);
    }
  }
  return {std::move(g), static_cast<std::uint64_t>(f.rows()) * k * k};
}

inline double frobenius_norm_squared(const Matrix& a) {
  double s = 0.0;
  if (const auto* sp = std::get_if<SparseMatrix>(&a)) {
    for (double v : sp->values()) s += v * v;
  } else {
    for (double v : std::get<DenseMatrix>(a).data()) s += v * v;
  }
  return s;
}

/// Σ_ab P_ab Q_ab, i.e. trace(P Q) for symmetric P, Q.
inline double trace_of_product(const DenseMatrix& p, const DenseMatrix& q) {
  require(p.rows() == q.rows() && p.cols() == q.cols(), "trace_of_product: shape mismatch");
  double s = 0.0;
  for (std::size_t e = 0; e < p.size(); ++e) s += p.data()[e] * q.data()[e];
  return s;
}

/// ‖A − WH‖_F. Dense A is evaluated directly; sparse A through
/// ‖A‖² − 2⟨A, WH⟩ + tr((WᵀW)(HHᵀ)), clamped at zero before the root.
inline double frobenius_residual(const Matrix& a, const DenseMatrix& w, const DenseMatrix& h) {
  const std::size_t m = rows_of(a);
  const std::size_t n = cols_of(a);
  require(w.rows() == m && h.cols() == n && w.cols() == h.rows(),
          "frobenius_residual: dimensions are not conformal");
  const std::size_t k = w.cols();
  if (const auto* d = std::get_if<DenseMatrix>(&a)) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double wh = 0.0;
        for (std::size_t l = 0; l < k; ++l) wh += w(i, l) * h(l, j);
        const double r = (*d)(i, j) - wh;
        s += r * r;
      }
    }
    return std::sqrt(s);
  }
  const auto& sp = std::get<SparseMatrix>(a);
  double cross = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t e = sp.row_ptr()[i]; e < sp.row_ptr()[i + 1]; ++e) {
      const std::size_t j = sp.col_idx()[e];
      double wh = 0.0;
      for (std::size_t l = 0; l < k; ++l) wh += w(i, l) * h(l, j);
      cross += sp.values()[e] * wh;
    }
  }
  if (k == 0) return std::sqrt(frobenius_norm_squared(a));
  const double quad = trace_of_product(gram(w).matrix, gram(transpose(h)).matrix);
  const double sq = frobenius_norm_squared(a) - 2.0 * cross + quad;
  return std::sqrt(std::max(sq, 0.0));
}

// ---------------------------------------------------------------------------
// Partitioning
// ---------------------------------------------------------------------------

/// Splits [0, extent) into `parts` contiguous ranges; the first extent mod parts
/// ranges get one extra element.
inline std::vector<Range> split_extent(std::size_t extent, std::size_t parts) {
  require(parts >= 1, "split_extent: parts must be >= 1");
  std::vector<Range> out;
  out.reserve(parts);
  const std::size_t base = extent / parts;
  const std::size_t extra = extent % parts;
  std::size_t at = 0;
  for (std::size_t b = 0; b < parts; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    out.push_back({at, at + len});
    at += len;
  }
  return out;
}

/// Ownership of A, W and H blocks on a p_r × p_c grid.
///
/// Rank (i, j) owns A_ij = rows row_block(i) × cols col_block(j), the W rows
/// w_block(i, j) (sub-block j of row block i) and the H columns h_block(i, j)
/// (sub-block i of column block j). With grid p×1 this is also the 1D layout:
/// rank i owns row block i of W and the i-th of p equal column blocks of H.
class BlockMap {
 public:
  BlockMap() = default;
  BlockMap(std::size_t m, std::size_t n, GridShape grid) : m_(m), n_(n), grid_(grid) {
    row_blocks_ = split_extent(m, grid.rows);
    col_blocks_ = split_extent(n, grid.cols);
    for (const auto& rb : row_blocks_)
      for (const auto& sub : split_extent(rb.size(), grid.cols))
        w_blocks_.push_back({rb.begin + sub.begin, rb.begin + sub.end});
    for (const auto& cb : col_blocks_)
      for (const auto& sub : split_extent(cb.size(), grid.rows))
        h_blocks_.push_back({cb.begin + sub.begin, cb.begin + sub.end});
  }

  std::size_t m() const noexcept { return m_; }
  std::size_t n() const noexcept { return n_; }
  const GridShape& grid() const noexcept { return grid_; }

  Range row_block(std::size_t i) const { return row_blocks_.at(i); }
  Range col_block(std::size_t j) const { return col_blocks_.at(j); }
  Range w_block(std::size_t i, std::size_t j) const { return w_blocks_.at(i * grid_.cols + j); }
  Range h_block(std::size_t i, std::size_t j) const { return h_blocks_.at(j * grid_.rows + i); }

  const std::vector<Range>& row_blocks() const noexcept { return row_blocks_; }
  const std::vector<Range>& col_blocks() const noexcept { return col_blocks_; }

  /// W sub-blocks inside row block i, in grid-column order.
  std::vector<Range> w_blocks_in_row(std::size_t i) const {
    return {w_blocks_.begin() + static_cast<std::ptrdiff_t>(i * grid_.cols),
            w_blocks_.begin() + static_cast<std::ptrdiff_t>((i + 1) * grid_.cols)};
  }
  /// H sub-blocks inside column block j, in grid-row order.
  std::vector<Range> h_blocks_in_col(std::size_t j) const {
    return {h_blocks_.begin() + static_cast<std::ptrdiff_t>(j * grid_.rows),
            h_blocks_.begin() + static_cast<std::ptrdiff_t>((j + 1) * grid_.rows)};
  }

  bool has_empty_factor_block() const {
    auto empty = [](const Range& r) { return r.empty(); };
    return std::any_of(w_blocks_.begin(), w_blocks_.end(), empty) ||
           std::any_of(h_blocks_.begin(), h_blocks_.end(), empty);
  }

 private:
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  GridShape grid_;
  std::vector<Range> row_blocks_;
  std::vector<Range> col_blocks_;
  std::vector<Range> w_blocks_;  // indexed i·p_c + j
  std::vector<Range> h_blocks_;  // indexed j·p_r + i
};

inline BlockMap partition(std::size_t m, std::size_t n, GridShape grid) {
  if (grid.rows > m) throw ConfigError("p_r = " + std::to_string(grid.rows) + " exceeds m = " + std::to_string(m));
  if (grid.cols > n) throw ConfigError("p_c = " + std::to_string(grid.cols) + " exceeds n = " + std::to_string(n));
  return BlockMap(m, n, grid);
}

/// Copy of the sub-matrix rows × cols.
inline Matrix slice(const Matrix& a, Range rows, Range cols) {
  require(rows.end <= rows_of(a) && cols.end <= cols_of(a), "slice out of bounds");
  if (const auto* d = std::get_if<DenseMatrix>(&a)) {
    DenseMatrix out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = (*d)(rows.begin + i, cols.begin + j);
    return out;
  }
  const auto& s = std::get<SparseMatrix>(a);
  std::vector<Triplet> ts;
  for (std::size_t i = rows.begin; i < rows.end; ++i) {
    for (std::size_t e = s.row_ptr()[i]; e < s.row_ptr()[i + 1]; ++e) {
      const std::size_t j = s.col_idx()[e];
      if (cols.contains(j)) ts.push_back({i - rows.begin, j - cols.begin, s.values()[e]});
    }
  }
  return SparseMatrix::from_triplets(rows.size(), cols.size(), std::move(ts));
}

}  // namespace hpcnmf

#endif  // HPCNMF_MATRIX_HPP
