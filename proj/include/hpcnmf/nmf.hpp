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
 * @file    nmf.hpp
 * @brief   Alternating NLS factorization A ≈ WH: a single-process reference,
 *          the naive 1D parallelization and the 2D-grid algorithm.
 *
 * All three share the update order (W from HHᵀ and AHᵀ, then H from WᵀW and
 * WᵀA) and the same local kernels, so for a fixed seed they produce the same
 * factors up to summation-order roundoff, and bitwise the same on one rank.
 *
 * The residual ‖A − WH‖_F is evaluated after every iteration through
 * ‖A‖² − 2⟨WᵀA, H⟩ + tr(WᵀW · HHᵀ) from quantities each rank already holds;
 * its (k²+1)-word aggregation is charged to Category::Other.
 */

#ifndef HPCNMF_NMF_HPP
#define HPCNMF_NMF_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hpcnmf/cluster.hpp"
#include "hpcnmf/common.hpp"
#include "hpcnmf/data_io.hpp"
#include "hpcnmf/matrix.hpp"
#include "hpcnmf/nls.hpp"
#include "hpcnmf/random.hpp"

namespace hpcnmf {

enum class Algorithm { Sequential, Naive, Hpc };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Sequential: return "sequential";
    case Algorithm::Naive: return "naive";
    case Algorithm::Hpc: return "hpc";
  }
  return "?";
}

struct NmfConfig {
  std::size_t k = 1;
  std::size_t max_iters = 10;
  SolverChoice solver;
  std::uint64_t seed = 1;
  std::optional<double> residual_tolerance;
  std::optional<GridShape> grid;  // hpc only; chosen by select_grid when absent
  bool compute_residual = true;
  bool keep_history = false;      // store gathered W, H after every iteration

  void validate(std::size_t m, std::size_t n) const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (k > std::min(m, n))
      throw ConfigError("k = " + std::to_string(k) + " exceeds min(m, n) = " + std::to_string(std::min(m, n)));
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (residual_tolerance && !(*residual_tolerance > 0))
      throw ConfigError("residual tolerance must be positive");
    if (residual_tolerance && !compute_residual)
      throw ConfigError("a residual tolerance needs the residual to be computed");
    solver.validate();
  }
};

/// Logical (gathered) factors: W is m×k, H is k×n.
struct FactorPair {
  DenseMatrix W;
  DenseMatrix H;
};

struct IterationStats {
  std::size_t iteration = 0;  // 1-based
  double residual = std::numeric_limits<double>::quiet_NaN();
  double relative_residual = std::numeric_limits<double>::quiet_NaN();
  CategoryTallies delta{};    // per category, max over ranks of this iteration's tallies
};

struct NmfResult {
  Algorithm algorithm = Algorithm::Sequential;
  GridShape grid;
  BlockMap map;
  FactorPair factors;
  std::vector<IterationStats> iterations;
  CostLedger ledger;
  std::vector<std::vector<CategoryTallies>> rank_iterations;  // [rank][iteration]
  std::vector<FactorPair> history;
};

enum class StopDecision { Continue, Stop };

/// Stop at max_iters, or once |res_t − res_{t−1}| / res_1 drops below the tolerance.
inline StopDecision stopping_check(const std::vector<IterationStats>& stats, const NmfConfig& cfg) {
  if (stats.size() >= cfg.max_iters) return StopDecision::Stop;
  if (!cfg.residual_tolerance || stats.size() < 2) return StopDecision::Continue;
  const double r0 = stats.front().residual;
  if (!(r0 > 0)) return StopDecision::Stop;
  const double change = std::abs(stats.back().residual - stats[stats.size() - 2].residual) / r0;
  return change < *cfg.residual_tolerance ? StopDecision::Stop : StopDecision::Continue;
}

// ---------------------------------------------------------------------------
// Grid selection
// ---------------------------------------------------------------------------

namespace detail {

template <class Score>
GridShape best_divisor_pair(std::size_t p, Score&& score) {
  GridShape best(p, 1);
  double best_score = score(p, std::size_t{1});
  for (std::size_t pr = p - 1; pr >= 1; --pr) {  // descending so ties keep the larger p_r
    if (p % pr) continue;
    const double s = score(pr, p / pr);
    if (s < best_score - 1e-12 * std::max(1.0, std::abs(best_score))) {
      best_score = s;
      best = GridShape(pr, p / pr);
    }
  }
  return best;
}

}  // namespace detail

/// Tall case m/p ≥ n → p×1, wide case n/p ≥ m → 1×p; otherwise the divisor
/// pair closest (in log scale) to p_r = √(np/m), p_c = √(mp/n), ties toward p_r ≥ p_c.
inline GridShape select_grid(std::size_t m, std::size_t n, std::size_t p) {
  if (p == 0) throw ConfigError("p must be >= 1");
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  const double pd = static_cast<double>(p);
  if (md / pd >= nd) return GridShape(p, 1);
  if (nd / pd >= md) return GridShape(1, p);
  const double target = std::log(std::sqrt(nd * pd / md));
  return detail::best_divisor_pair(
      p, [&](std::size_t pr, std::size_t) { return std::abs(std::log(static_cast<double>(pr)) - target); });
}

/// Divisor pair minimizing the modeled factor traffic (p_r−1)nk/p + (p_c−1)mk/p,
/// i.e. n·p_r + m·p_c, with the same tall/wide rules as select_grid.
inline GridShape comm_optimal_grid(std::size_t m, std::size_t n, std::size_t p) {
  if (p == 0) throw ConfigError("p must be >= 1");
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  if (md / static_cast<double>(p) >= nd) return GridShape(p, 1);
  if (nd / static_cast<double>(p) >= md) return GridShape(1, p);
  return detail::best_divisor_pair(p, [&](std::size_t pr, std::size_t pc) {
    return nd * static_cast<double>(pr) + md * static_cast<double>(pc);
  });
}

// ---------------------------------------------------------------------------
// Initialization and shared step helpers
// ---------------------------------------------------------------------------

/// Hᵀ rows for the H columns in `cols`: entry (c, l) is H(l, c) = U[0,1) keyed
/// by (seed, l, c), so the logical H is the same for every grid.
inline DenseMatrix init_ht_block(std::uint64_t seed, Range cols, std::size_t k) {
  DenseMatrix ht(cols.size(), k);
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t l = 0; l < k; ++l) ht(c, l) = counter_uniform(seed, Stream::FactorH, l, cols.begin + c);
  return ht;
}

/// Per-rank Hᵀ blocks (indexed by linear rank id) for a block map.
inline std::vector<DenseMatrix> init_H(std::size_t n, std::size_t k, std::uint64_t seed, const BlockMap& map) {
  require(map.n() == n, "init_H: map does not match n");
  std::vector<DenseMatrix> out;
  for (std::size_t r = 0; r < map.grid().size(); ++r) {
    const auto id = RankId::from_linear(map.grid(), r);
    out.push_back(init_ht_block(seed, map.h_block(id.row, id.col), k));
  }
  return out;
}

/// Starting W for MU/HALS (which need a previous iterate); zeros for BPP.
inline DenseMatrix init_w_block(const NmfConfig& cfg, Range rows) {
  DenseMatrix w(rows.size(), cfg.k);
  if (cfg.solver.kind == SolverKind::BPP) return w;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t l = 0; l < cfg.k; ++l) w(r, l) = counter_uniform(cfg.seed, Stream::FactorW, rows.begin + r, l);
  return w;
}

namespace detail {

/// Solves for a tall factor block F (rows×k) given the Gram and the k×rows rhs.
inline DenseMatrix nls_step(const SolverChoice& s, const DenseMatrix& gram, DenseMatrix rhs,
                            const DenseMatrix& factor_tall, std::uint64_t& flops) {
  NormalEquations neq{gram, std::move(rhs)};
  auto up = solve_nls(s, neq, transpose(factor_tall));
  flops = up.flops;
  return transpose(up.x);
}

/// Σ elementwise product of two equally shaped blocks, row-major order.
inline double block_dot(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "block_dot: shape mismatch");
  double s = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) s += a.data()[e] * b.data()[e];
  return s;
}

inline std::vector<double> pack_residual_terms(const DenseMatrix& local_gram, double dot) {
  std::vector<double> v(local_gram.data().begin(), local_gram.data().end());
  v.push_back(dot);
  return v;
}

inline double residual_from_terms(double norm_a2, const std::vector<double>& terms, const DenseMatrix& wtw) {
  const std::size_t k = wtw.rows();
  double quad = 0.0;
  for (std::size_t e = 0; e < k * k; ++e) quad += wtw.data()[e] * terms[e];
  const double sq = norm_a2 - 2.0 * terms[k * k] + quad;
  return std::sqrt(std::max(sq, 0.0));
}

inline DenseMatrix as_matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return DenseMatrix::from_data(rows, cols, std::move(v));
}

inline std::vector<std::size_t> scaled_sizes(const std::vector<Range>& ranges, std::size_t k) {
  std::vector<std::size_t> out;
  for (const auto& r : ranges) out.push_back(r.size() * k);
  return out;
}

/// What a rank hands back from a distributed run.
struct RankOutput {
  DenseMatrix w;   // rows w_block × k
  DenseMatrix ht;  // rows h_block × k
  std::vector<double> residuals;
  std::vector<CategoryTallies> deltas;
  std::vector<std::pair<DenseMatrix, DenseMatrix>> history;
};

inline CategoryTallies diff(const CategoryTallies& now, const CategoryTallies& before) {
  CategoryTallies d;
  for (std::size_t c = 0; c < kCategoryCount; ++c) d[c] = now[c] - before[c];
  return d;
}

inline void record_iteration(RankOutput& out, Comm& comm, CategoryTallies& snapshot, const NmfConfig& cfg,
                             const DenseMatrix& w, const DenseMatrix& ht, double residual) {
  out.deltas.push_back(diff(comm.tallies(), snapshot));
  snapshot = comm.tallies();
  out.residuals.push_back(residual);
  if (cfg.keep_history) out.history.emplace_back(w, ht);
}

inline std::vector<IterationStats> stats_so_far(const std::vector<double>& residuals, double norm_a) {
  std::vector<IterationStats> s;
  for (std::size_t t = 0; t < residuals.size(); ++t) {
    IterationStats it;
    it.iteration = t + 1;
    it.residual = residuals[t];
    it.relative_residual = norm_a > 0 ? residuals[t] / norm_a : 0.0;
    s.push_back(it);
  }
  return s;
}

/// Assembles the logical W and H from per-rank tall blocks.
inline FactorPair assemble(const BlockMap& map, std::size_t k,
                           const std::vector<std::pair<const DenseMatrix*, const DenseMatrix*>>& blocks) {
  FactorPair f{DenseMatrix(map.m(), k), DenseMatrix(k, map.n())};
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    const auto id = RankId::from_linear(map.grid(), r);
    const auto wr = map.w_block(id.row, id.col);
    const auto hr = map.h_block(id.row, id.col);
    for (std::size_t i = 0; i < wr.size(); ++i)
      for (std::size_t l = 0; l < k; ++l) f.W(wr.begin + i, l) = (*blocks[r].first)(i, l);
    for (std::size_t c = 0; c < hr.size(); ++c)
      for (std::size_t l = 0; l < k; ++l) f.H(l, hr.begin + c) = (*blocks[r].second)(c, l);
  }
  return f;
}

template <class Outputs>
NmfResult collect(Algorithm algo, const BlockMap& map, const NmfConfig& cfg, VirtualRun<Outputs>& run,
                  double norm_a) {
  NmfResult res;
  res.algorithm = algo;
  res.grid = map.grid();
  res.map = map;
  res.ledger = std::move(run.ledger);
  const auto& outs = run.outputs;
  std::vector<std::pair<const DenseMatrix*, const DenseMatrix*>> finals;
  for (const auto& o : outs) finals.emplace_back(&o.w, &o.ht);
  res.factors = assemble(map, cfg.k, finals);
  res.iterations = stats_so_far(outs.front().residuals, norm_a);
  for (std::size_t t = 0; t < res.iterations.size(); ++t) {
    auto& d = res.iterations[t].delta;
    for (const auto& o : outs) {
      for (std::size_t c = 0; c < kCategoryCount; ++c) {
        d[c].words = std::max(d[c].words, o.deltas[t][c].words);
        d[c].messages = std::max(d[c].messages, o.deltas[t][c].messages);
        d[c].flops = std::max(d[c].flops, o.deltas[t][c].flops);
        d[c].wall_seconds = std::max(d[c].wall_seconds, o.deltas[t][c].wall_seconds);
      }
    }
  }
  for (const auto& o : outs) res.rank_iterations.push_back(o.deltas);
  if (cfg.keep_history) {
    for (std::size_t t = 0; t < outs.front().history.size(); ++t) {
      std::vector<std::pair<const DenseMatrix*, const DenseMatrix*>> blocks;
      for (const auto& o : outs) blocks.emplace_back(&o.history[t].first, &o.history[t].second);
      res.history.push_back(assemble(map, cfg.k, blocks));
    }
  }
  return res;
}

inline double dense_words(const DenseMatrix& m) { return static_cast<double>(m.size()); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Sequential reference
// ---------------------------------------------------------------------------

/// Single-process alternating updates; the equivalence oracle for the
/// parallel algorithms.
inline NmfResult sequential_nmf(const Matrix& a, const NmfConfig& cfg) {
  const std::size_t m = rows_of(a);
  const std::size_t n = cols_of(a);
  cfg.validate(m, n);
  const std::size_t k = cfg.k;
  NmfResult res;
  res.algorithm = Algorithm::Sequential;
  res.map = partition(m, n, GridShape(1, 1));
  res.ledger = CostLedger(1);

  DenseMatrix ht = init_ht_block(cfg.seed, {0, n}, k);
  DenseMatrix w = init_w_block(cfg, {0, m});
  const double norm_a2 = frobenius_norm_squared(a);
  std::vector<double> residuals;
  CategoryTallies& tallies = res.ledger.rank(0);
  auto charge = [&](Category c, std::uint64_t flops) { tallies[static_cast<std::size_t>(c)].flops += static_cast<double>(flops); };

  for (;;) {
    const CategoryTallies before = tallies;
    std::uint64_t fl = 0;
    auto hht = gram(ht);
    charge(Category::Gram, hht.flops);
    auto v = matmul_cross_right(a, ht);
    charge(Category::MM, v.flops);
    w = detail::nls_step(cfg.solver, hht.matrix, transpose(v.matrix), w, fl);
    charge(Category::NLS, fl);

    auto wtw = gram(w);
    charge(Category::Gram, wtw.flops);
    auto y = matmul_cross_left(transpose(w), a);
    charge(Category::MM, y.flops);
    const DenseMatrix yt = transpose(y.matrix);
    ht = detail::nls_step(cfg.solver, wtw.matrix, transpose(yt), ht, fl);
    charge(Category::NLS, fl);

    double residual = std::numeric_limits<double>::quiet_NaN();
    if (cfg.compute_residual) {
      auto hg = gram(ht);
      charge(Category::Other, hg.flops);
      const auto terms = detail::pack_residual_terms(hg.matrix, detail::block_dot(yt, ht));
      residual = detail::residual_from_terms(norm_a2, terms, wtw.matrix);
    }
    residuals.push_back(residual);
    res.rank_iterations.resize(1);
    res.rank_iterations[0].push_back(detail::diff(tallies, before));
    if (cfg.keep_history) res.history.push_back({w, transpose(ht)});
    if (stopping_check(detail::stats_so_far(residuals, std::sqrt(norm_a2)), cfg) == StopDecision::Stop) break;
  }
  res.factors = {w, transpose(ht)};
  res.iterations = detail::stats_so_far(residuals, std::sqrt(norm_a2));
  for (std::size_t t = 0; t < res.iterations.size(); ++t) res.iterations[t].delta = res.rank_iterations[0][t];
  res.ledger.set_peak_memory_words(
      0, static_cast<double>(stored_words(a) + (m + n) * k * 3));
  return res;
}

// ---------------------------------------------------------------------------
// Naive parallel NMF (1D, A stored twice)
// ---------------------------------------------------------------------------

/// Rank i holds A_i (row block) and A^i (column block); each half-iteration
/// all-gathers the whole other factor and forms its Gram redundantly.
inline NmfResult naive_parallel_nmf(const Matrix& a, const NmfConfig& cfg, std::size_t p,
                                    ClusterOptions opts = {}) {
  const std::size_t m = rows_of(a);
  const std::size_t n = cols_of(a);
  cfg.validate(m, n);
  if (p < 1) throw ConfigError("p must be >= 1");
  const std::size_t k = cfg.k;
  const BlockMap map = partition(m, n, GridShape(p, 1));
  const DistributedMatrix dist = distribute(a, map, Layout::NaiveDual);
  std::vector<Range> wranges, hranges;
  for (std::size_t i = 0; i < p; ++i) {
    wranges.push_back(map.w_block(i, 0));
    hranges.push_back(map.h_block(i, 0));
  }
  const auto wcounts = detail::scaled_sizes(wranges, k);
  const auto hcounts = detail::scaled_sizes(hranges, k);
  const double norm_a = std::sqrt(frobenius_norm_squared(a));

  auto program = [&](Comm& comm) {
    const std::size_t i = comm.rank().row;
    const Matrix& a_row = dist.row_blocks[i];
    const Matrix& a_col = dist.col_blocks[i];
    const auto world = comm.world();
    detail::RankOutput out;
    DenseMatrix ht = init_ht_block(cfg.seed, hranges[i], k);
    DenseMatrix w = init_w_block(cfg, wranges[i]);
    double norm_a2 = 0;
    if (cfg.compute_residual) {
      const double local = frobenius_norm_squared(a_row);
      norm_a2 = comm.all_reduce(world, std::span(&local, 1), Category::Other)[0];
    }
    const double data_words = static_cast<double>(stored_words(a_row) + stored_words(a_col));
    CategoryTallies snapshot = comm.tallies();
    std::vector<double> residuals;
    for (;;) {
      std::uint64_t fl = 0;
      auto h_full = detail::as_matrix(n, k, comm.all_gather(world, ht.data(), hcounts));
      auto hht = comm.timed(Category::Gram, [&] { return gram(h_full); });
      comm.add_flops(Category::Gram, static_cast<double>(hht.flops));
      auto v = comm.timed(Category::MM, [&] { return matmul_cross_right(a_row, h_full); });
      comm.add_flops(Category::MM, static_cast<double>(v.flops));
      w = comm.timed(Category::NLS, [&] { return detail::nls_step(cfg.solver, hht.matrix, transpose(v.matrix), w, fl); });
      comm.add_flops(Category::NLS, static_cast<double>(fl));

      auto w_full = detail::as_matrix(m, k, comm.all_gather(world, w.data(), wcounts));
      auto wtw = comm.timed(Category::Gram, [&] { return gram(w_full); });
      comm.add_flops(Category::Gram, static_cast<double>(wtw.flops));
      auto y = comm.timed(Category::MM, [&] { return matmul_cross_left(transpose(w_full), a_col); });
      comm.add_flops(Category::MM, static_cast<double>(y.flops));
      comm.note_memory(data_words + detail::dense_words(w) + detail::dense_words(ht) + detail::dense_words(h_full) +
                       detail::dense_words(w_full) + detail::dense_words(v.matrix) + detail::dense_words(y.matrix));
      const DenseMatrix yt = transpose(y.matrix);
      ht = comm.timed(Category::NLS, [&] { return detail::nls_step(cfg.solver, wtw.matrix, y.matrix, ht, fl); });
      comm.add_flops(Category::NLS, static_cast<double>(fl));

      double residual = std::numeric_limits<double>::quiet_NaN();
      if (cfg.compute_residual) {
        auto hg = gram(ht);
        comm.add_flops(Category::Other, static_cast<double>(hg.flops));
        const auto terms = comm.all_reduce(world, detail::pack_residual_terms(hg.matrix, detail::block_dot(yt, ht)),
                                           Category::Other);
        residual = detail::residual_from_terms(norm_a2, terms, wtw.matrix);
      }
      detail::record_iteration(out, comm, snapshot, cfg, w, ht, residual);
      if (stopping_check(detail::stats_so_far(out.residuals, norm_a), cfg) == StopDecision::Stop) break;
    }
    out.w = std::move(w);
    out.ht = std::move(ht);
    return out;
  };

  auto run = run_virtual(GridShape(p, 1), program, opts);
  return detail::collect(Algorithm::Naive, map, cfg, run, norm_a);
}

// ---------------------------------------------------------------------------
// HPC-NMF on a p_r × p_c grid
// ---------------------------------------------------------------------------

/// Rank (i, j) holds A_ij, (W_i)_j and (H_j)_i. Per half-iteration: local Gram
/// + all-reduce, all-gather of the factor along the grid column (row),
/// local product with A_ij, reduce-scatter along the grid row (column), and
/// a local NLS solve for the owned factor rows.
inline NmfResult hpc_nmf(const Matrix& a, const NmfConfig& cfg, std::size_t p, ClusterOptions opts = {}) {
  const std::size_t m = rows_of(a);
  const std::size_t n = cols_of(a);
  cfg.validate(m, n);
  if (p < 1) throw ConfigError("p must be >= 1");
  const GridShape grid = cfg.grid ? *cfg.grid : select_grid(m, n, p);
  if (grid.size() != p)
    throw ConfigError("grid " + grid.str() + " does not have p = " + std::to_string(p) + " ranks");
  const std::size_t k = cfg.k;
  const BlockMap map = partition(m, n, grid);
  const DistributedMatrix dist = distribute(a, map, Layout::Grid2D);
  const double norm_a = std::sqrt(frobenius_norm_squared(a));

  auto program = [&](Comm& comm) {
    const auto id = comm.rank();
    const Matrix& a_ij = dist.blocks[id.linear];
    const auto world = comm.world();
    const auto row = comm.row_group();
    const auto col = comm.col_group();
    const auto wcounts = detail::scaled_sizes(map.w_blocks_in_row(id.row), k);
    const auto hcounts = detail::scaled_sizes(map.h_blocks_in_col(id.col), k);
    const Range rows_i = map.row_block(id.row);
    const Range cols_j = map.col_block(id.col);
    detail::RankOutput out;
    DenseMatrix ht = init_ht_block(cfg.seed, map.h_block(id.row, id.col), k);
    DenseMatrix w = init_w_block(cfg, map.w_block(id.row, id.col));
    double norm_a2 = 0;
    if (cfg.compute_residual) {
      const double local = frobenius_norm_squared(a_ij);
      norm_a2 = comm.all_reduce(world, std::span(&local, 1), Category::Other)[0];
    }
    const double data_words = static_cast<double>(stored_words(a_ij));
    CategoryTallies snapshot = comm.tallies();
    for (;;) {
      std::uint64_t fl = 0;
      // W given H
      auto u = comm.timed(Category::Gram, [&] { return gram(ht); });
      comm.add_flops(Category::Gram, static_cast<double>(u.flops));
      auto hht = detail::as_matrix(k, k, comm.all_reduce(world, u.matrix.data()));
      auto h_j = detail::as_matrix(cols_j.size(), k, comm.all_gather(col, ht.data(), hcounts));
      auto v = comm.timed(Category::MM, [&] { return matmul_cross_right(a_ij, h_j); });
      comm.add_flops(Category::MM, static_cast<double>(v.flops));
      auto aht = detail::as_matrix(w.rows(), k, comm.reduce_scatter(row, v.matrix.data(), wcounts));
      w = comm.timed(Category::NLS, [&] { return detail::nls_step(cfg.solver, hht, transpose(aht), w, fl); });
      comm.add_flops(Category::NLS, static_cast<double>(fl));

      // H given W
      auto x = comm.timed(Category::Gram, [&] { return gram(w); });
      comm.add_flops(Category::Gram, static_cast<double>(x.flops));
      auto wtw = detail::as_matrix(k, k, comm.all_reduce(world, x.matrix.data()));
      auto w_i = detail::as_matrix(rows_i.size(), k, comm.all_gather(row, w.data(), wcounts));
      auto y = comm.timed(Category::MM, [&] { return matmul_cross_left(transpose(w_i), a_ij); });
      comm.add_flops(Category::MM, static_cast<double>(y.flops));
      comm.note_memory(data_words + detail::dense_words(w) + detail::dense_words(ht) + detail::dense_words(h_j) +
                       detail::dense_words(w_i) + detail::dense_words(v.matrix) + detail::dense_words(y.matrix));
      auto wta = detail::as_matrix(ht.rows(), k, comm.reduce_scatter(col, transpose(y.matrix).data(), hcounts));
      ht = comm.timed(Category::NLS, [&] { return detail::nls_step(cfg.solver, wtw, transpose(wta), ht, fl); });
      comm.add_flops(Category::NLS, static_cast<double>(fl));

      double residual = std::numeric_limits<double>::quiet_NaN();
      if (cfg.compute_residual) {
        auto hg = gram(ht);
        comm.add_flops(Category::Other, static_cast<double>(hg.flops));
        const auto terms = comm.all_reduce(world, detail::pack_residual_terms(hg.matrix, detail::block_dot(wta, ht)),
                                           Category::Other);
        residual = detail::residual_from_terms(norm_a2, terms, wtw);
      }
      detail::record_iteration(out, comm, snapshot, cfg, w, ht, residual);
      if (stopping_check(detail::stats_so_far(out.residuals, norm_a), cfg) == StopDecision::Stop) break;
    }
    out.w = std::move(w);
    out.ht = std::move(ht);
    return out;
  };

  auto run = run_virtual(grid, program, opts);
  return detail::collect(Algorithm::Hpc, map, cfg, run, norm_a);
}

/// Dispatch by algorithm. `p` is ignored by the sequential reference.
inline NmfResult run_nmf(Algorithm algo, const Matrix& a, const NmfConfig& cfg, std::size_t p,
                         ClusterOptions opts = {}) {
  switch (algo) {
    case Algorithm::Sequential: return sequential_nmf(a, cfg);
    case Algorithm::Naive: return naive_parallel_nmf(a, cfg, p, opts);
    case Algorithm::Hpc: return hpc_nmf(a, cfg, p, opts);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace hpcnmf

#endif  // HPCNMF_NMF_HPP
