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
 * @file    data_io.hpp
 * @brief   Matrix Market I/O, synthetic generators and block distribution.
 */

#ifndef HPCNMF_DATA_IO_HPP
#define HPCNMF_DATA_IO_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "hpcnmf/common.hpp"
#include "hpcnmf/matrix.hpp"
#include "hpcnmf/random.hpp"

namespace hpcnmf {

// ---------------------------------------------------------------------------
// Matrix Market
// ---------------------------------------------------------------------------

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses "array" (dense, column-major) and "coordinate" (sparse, 1-based)
/// files with "general" or "symmetric" symmetry. Comment lines are skipped.
inline Matrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty Matrix Market stream", 0);
  ++lineno;
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (detail::lower(banner) != "%%matrixmarket" || detail::lower(object) != "matrix")
    throw ParseError("missing %%MatrixMarket matrix banner", lineno);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (format != "array" && format != "coordinate") throw ParseError("unknown format '" + format + "'", lineno);
  if (field != "real" && field != "integer" && field != "double")
    throw ParseError("unsupported field '" + field + "'", lineno);
  if (symmetry != "general" && symmetry != "symmetric")
    throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);
  const bool symmetric = symmetry == "symmetric";

  auto next_data_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++lineno;
      if (!out.empty() && out[0] == '%') continue;
      if (detail::blank(out)) continue;
      return true;
    }
    return false;
  };

  if (!next_data_line(line)) throw ParseError("missing size line", lineno);
  std::istringstream ss(line);
  long long m = -1, n = -1, nnz = -1;
  ss >> m >> n;
  if (format == "coordinate") ss >> nnz;
  if (ss.fail() || m < 0 || n < 0 || (format == "coordinate" && nnz < 0))
    throw ParseError("malformed size line", lineno);
  std::string extra;
  if (ss >> extra) throw ParseError("trailing tokens on size line", lineno);
  if (symmetric && m != n) throw ParseError("symmetric matrix must be square", lineno);
  const auto rows = static_cast<std::size_t>(m);
  const auto cols = static_cast<std::size_t>(n);

  auto parse_value = [&](std::istringstream& s) {
    std::string tok;
    if (!(s >> tok)) throw ParseError("missing value", lineno);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);  // strtod keeps subnormals; >> double may not
    if (end != tok.c_str() + tok.size()) throw ParseError("malformed value '" + tok + "'", lineno);
    if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
    return v;
  };

  if (format == "array") {
    DenseMatrix d(rows, cols);
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = symmetric ? j : 0; i < rows; ++i) {
        if (!next_data_line(line)) throw ParseError("fewer values than declared", lineno);
        std::istringstream vs(line);
        const double v = parse_value(vs);
        if (vs >> extra) throw ParseError("more than one value on an array line", lineno);
        d(i, j) = v;
        if (symmetric) d(j, i) = v;
      }
    }
    if (next_data_line(line)) throw ParseError("more values than declared", lineno);
    return d;
  }

  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(nnz) * (symmetric ? 2 : 1));
  std::unordered_map<std::uint64_t, std::size_t> seen;
  auto add = [&](std::size_t i, std::size_t j, double v) {
    const std::uint64_t key = static_cast<std::uint64_t>(i) * cols + j;
    if (!seen.emplace(key, lineno).second)
      throw ParseError("duplicate entry (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) + ")", lineno);
    ts.push_back({i, j, v});
  };
  for (long long e = 0; e < nnz; ++e) {
    if (!next_data_line(line)) throw ParseError("fewer entries than declared", lineno);
    std::istringstream es(line);
    long long i = 0, j = 0;
    if (!(es >> i >> j)) throw ParseError("malformed coordinate entry", lineno);
    const double v = parse_value(es);
    if (es >> extra) throw ParseError("trailing tokens on entry line", lineno);
    if (i < 1 || j < 1 || i > m || j > n)
      throw ParseError("index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range", lineno);
    add(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1), v);
    if (symmetric && i != j) add(static_cast<std::size_t>(j - 1), static_cast<std::size_t>(i - 1), v);
  }
  if (next_data_line(line)) throw ParseError("more entries than declared", lineno);
  return SparseMatrix::from_triplets(rows, cols, std::move(ts));
}

inline Matrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return read_matrix_market(in);
}

/// Dense → "array real general" (column-major); sparse → "coordinate real general".
/// Values use 17 significant digits, so read(write(M)) == M.
inline void write_matrix_market(const Matrix& a, std::ostream& out) {
  if (const auto* d = std::get_if<DenseMatrix>(&a)) {
    out << "%%MatrixMarket matrix array real general\n" << d->rows() << ' ' << d->cols() << '\n';
    for (std::size_t j = 0; j < d->cols(); ++j)
      for (std::size_t i = 0; i < d->rows(); ++i) out << detail::format_double((*d)(i, j)) << '\n';
  } else {
    const auto& s = std::get<SparseMatrix>(a);
    out << "%%MatrixMarket matrix coordinate real general\n"
        << s.rows() << ' ' << s.cols() << ' ' << s.nnz() << '\n';
    for (const auto& t : s.entries())
      out << t.row + 1 << ' ' << t.col + 1 << ' ' << detail::format_double(t.value) << '\n';
  }
  if (!out) throw std::runtime_error("write_matrix_market: stream error");
}

inline void write_matrix_market(const Matrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_matrix_market(a, out);
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

enum class SeedMode {
  Counter,       // keyed by (seed, global row, global col); identical for any grid
  PerRankPrime,  // sequential stream per rank seeded with a distinct prime; grid-dependent
};

struct DenseSyntheticSpec {
  std::size_t m = 0;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  double noise_std = 0.1;
};

struct SparseSyntheticSpec {
  std::size_t m = 0;
  std::size_t n = 0;
  double density = 0.001;
  std::uint64_t seed = 1;
};

using MatrixSource = std::variant<std::string, DenseSyntheticSpec, SparseSyntheticSpec>;

namespace detail {

struct PrimeStream {
  std::mt19937_64 engine;
  PrimeStream(std::uint64_t seed, std::size_t rank) : engine(seed ^ (nth_prime(rank + 100) * 0x9E3779B97F4A7C15ULL)) {}
  double uniform() { return unit_interval(engine()); }
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

}  // namespace detail

/// Block rows × cols of the dense synthetic matrix: uniform[0,1) plus Gaussian
/// noise, clamped at zero.
inline DenseMatrix gen_dense_synthetic(const DenseSyntheticSpec& spec, Range rows, Range cols,
                                       SeedMode mode = SeedMode::Counter, std::size_t rank = 0) {
  require(rows.end <= spec.m && cols.end <= spec.n, "gen_dense_synthetic: block out of range");
  require(spec.noise_std >= 0, "gen_dense_synthetic: noise_std must be >= 0");
  DenseMatrix d(rows.size(), cols.size());
  std::optional<detail::PrimeStream> ps;
  if (mode == SeedMode::PerRankPrime) ps.emplace(spec.seed, rank);
  for (std::size_t i = rows.begin; i < rows.end; ++i) {
    for (std::size_t j = cols.begin; j < cols.end; ++j) {
      double v;
      if (ps) {
        v = ps->uniform();
        if (spec.noise_std > 0) v += spec.noise_std * ps->normal();
      } else {
        v = counter_uniform(spec.seed, Stream::DenseValue, i, j);
        if (spec.noise_std > 0) v += spec.noise_std * counter_normal(spec.seed, Stream::DenseNoise, i, j);
      }
      d(i - rows.begin, j - cols.begin) = std::max(v, 0.0);
    }
  }
  return d;
}

inline DenseMatrix gen_dense_synthetic(const DenseSyntheticSpec& spec) {
  return gen_dense_synthetic(spec, {0, spec.m}, {0, spec.n});
}

/// Block of the sparse Erdős–Rényi matrix: each entry independently
/// nonzero with probability `density`, value uniform[0,1).
inline SparseMatrix gen_sparse_er(const SparseSyntheticSpec& spec, Range rows, Range cols,
                                  SeedMode mode = SeedMode::Counter, std::size_t rank = 0) {
  require(spec.density > 0 && spec.density <= 1, "gen_sparse_er: density must be in (0, 1]");
  require(rows.end <= spec.m && cols.end <= spec.n, "gen_sparse_er: block out of range");
  std::vector<Triplet> ts;
  std::optional<detail::PrimeStream> ps;
  if (mode == SeedMode::PerRankPrime) ps.emplace(spec.seed, rank);
  for (std::size_t i = rows.begin; i < rows.end; ++i) {
    for (std::size_t j = cols.begin; j < cols.end; ++j) {
      const double u = ps ? ps->uniform() : counter_uniform(spec.seed, Stream::SparseMask, i, j);
      if (u >= spec.density) continue;
      const double v = ps ? ps->uniform() : counter_uniform(spec.seed, Stream::SparseValue, i, j);
      ts.push_back({i - rows.begin, j - cols.begin, v});
    }
  }
  return SparseMatrix::from_triplets(rows.size(), cols.size(), std::move(ts));
}

inline SparseMatrix gen_sparse_er(const SparseSyntheticSpec& spec) {
  return gen_sparse_er(spec, {0, spec.m}, {0, spec.n});
}

/// Materializes a logical matrix from any source.
inline Matrix load_source(const MatrixSource& src) {
  if (const auto* path = std::get_if<std::string>(&src)) return read_matrix_market(*path);
  if (const auto* d = std::get_if<DenseSyntheticSpec>(&src)) {
    require(d->m >= 1 && d->n >= 1, "synthetic dimensions must be >= 1");
    return gen_dense_synthetic(*d);
  }
  const auto& s = std::get<SparseSyntheticSpec>(src);
  require(s.m >= 1 && s.n >= 1, "synthetic dimensions must be >= 1");
  return gen_sparse_er(s);
}

// ---------------------------------------------------------------------------
// Distribution
// ---------------------------------------------------------------------------

enum class Layout { Grid2D, NaiveDual };

/// Rank-local pieces of A. Grid2D fills `blocks` (A_ij by linear rank id);
/// NaiveDual fills `row_blocks` (A_i, m/p × n) and `col_blocks` (A^i, m × n/p).
struct DistributedMatrix {
  Layout layout = Layout::Grid2D;
  std::vector<Matrix> blocks;
  std::vector<Matrix> row_blocks;
  std::vector<Matrix> col_blocks;
};

inline DistributedMatrix distribute(const Matrix& a, const BlockMap& map, Layout layout) {
  require(rows_of(a) == map.m() && cols_of(a) == map.n(), "distribute: map does not match A");
  if (map.has_empty_factor_block()) throw ConfigError("distribute: grid leaves a rank with an empty factor block");
  DistributedMatrix out;
  out.layout = layout;
  const auto& g = map.grid();
  if (layout == Layout::Grid2D) {
    for (std::size_t r = 0; r < g.size(); ++r) {
      const auto id = RankId::from_linear(g, r);
      out.blocks.push_back(slice(a, map.row_block(id.row), map.col_block(id.col)));
    }
    return out;
  }
  require(g.cols == 1, "naive-dual layout expects a p x 1 block map");
  for (std::size_t i = 0; i < g.rows; ++i) {
    out.row_blocks.push_back(slice(a, map.row_block(i), {0, map.n()}));
    out.col_blocks.push_back(slice(a, {0, map.m()}, map.h_block(i, 0)));
  }
  return out;
}

/// Inverse of a Grid2D distribute.
inline Matrix gather_blocks(const DistributedMatrix& d, const BlockMap& map) {
  require(d.layout == Layout::Grid2D, "gather_blocks expects a Grid2D distribution");
  const auto& g = map.grid();
  const bool sparse = !d.blocks.empty() && is_sparse(d.blocks.front());
  if (sparse) {
    std::vector<Triplet> ts;
    for (std::size_t r = 0; r < g.size(); ++r) {
      const auto id = RankId::from_linear(g, r);
      const auto rb = map.row_block(id.row);
      const auto cb = map.col_block(id.col);
      for (const auto& t : std::get<SparseMatrix>(d.blocks[r]).entries())
        ts.push_back({t.row + rb.begin, t.col + cb.begin, t.value});
    }
    return SparseMatrix::from_triplets(map.m(), map.n(), std::move(ts));
  }
  DenseMatrix out(map.m(), map.n());
  for (std::size_t r = 0; r < g.size(); ++r) {
    const auto id = RankId::from_linear(g, r);
    const auto rb = map.row_block(id.row);
    const auto cb = map.col_block(id.col);
    const auto& blk = std::get<DenseMatrix>(d.blocks[r]);
    for (std::size_t i = 0; i < rb.size(); ++i)
      for (std::size_t j = 0; j < cb.size(); ++j) out(rb.begin + i, cb.begin + j) = blk(i, j);
  }
  return out;
}

}  // namespace hpcnmf

#endif  // HPCNMF_DATA_IO_HPP
