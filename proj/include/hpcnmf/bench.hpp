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
 * @file    bench.hpp
 * @brief   Benchmark driver behind the hpcnmf_bench tool: option checking,
 *          one run on the virtual cluster, and report files.
 */

#ifndef HPCNMF_BENCH_HPP
#define HPCNMF_BENCH_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hpcnmf/cost_model.hpp"
#include "hpcnmf/data_io.hpp"
#include "hpcnmf/nmf.hpp"
#include "hpcnmf/report.hpp"

namespace hpcnmf {

/// Invalid flag combination; the tool exits with status 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ExitCode : int { Success = 0, SolverFailure = 1, Usage = 2 };

struct BenchOptions {
  Algorithm algo = Algorithm::Hpc;
  SolverKind solver = SolverKind::BPP;
  std::optional<std::string> grid;  // auto | RxC | 1d-row | 1d-col
  std::size_t m = 0, n = 0, k = 0, p = 1, iters = 10;
  std::optional<std::string> synthetic;  // dense | sparse
  double density = 0.001;
  double noise_std = 0.1;
  std::uint64_t seed = 1;
  std::optional<std::string> input;
  std::optional<double> tol;
  bool no_residual = false;
  bool predict_only = false;
  ExecutionMode mode = ExecutionMode::Concurrent;
  std::string out_dir = ".";
  std::string format = "json";  // json | csv | both
  ModelParams model{1e-6, 1e-9, 1e-10};
};

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "sequential") return Algorithm::Sequential;
  if (s == "naive") return Algorithm::Naive;
  if (s == "hpc") return Algorithm::Hpc;
  throw UsageError("unknown algorithm '" + s + "' (expected naive, hpc or sequential)");
}

/// Resolves --grid for p ranks and an m×n matrix.
inline GridShape parse_grid(const std::string& spec, std::size_t m, std::size_t n, std::size_t p) {
  if (spec == "auto") return select_grid(m, n, p);
  if (spec == "1d-row") return GridShape(p, 1);
  if (spec == "1d-col") return GridShape(1, p);
  const auto x = spec.find_first_of("xX");
  if (x == std::string::npos || x == 0 || x + 1 == spec.size())
    throw UsageError("malformed --grid '" + spec + "' (expected auto, RxC, 1d-row or 1d-col)");
  std::size_t pr = 0, pc = 0;
  try {
    std::size_t used = 0;
    pr = std::stoul(spec.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("");
    pc = std::stoul(spec.substr(x + 1), &used);
    if (used != spec.size() - x - 1) throw std::invalid_argument("");
  } catch (const std::logic_error&) {
    throw UsageError("malformed --grid '" + spec + "'");
  }
  if (pr * pc != p)
    throw UsageError("--grid " + spec + " has " + std::to_string(pr * pc) + " ranks but --p is " + std::to_string(p));
  return GridShape(pr, pc);
}

/// Flag-combination checks that do not need the matrix.
inline void validate_options(const BenchOptions& o) {
  if (o.grid && o.algo != Algorithm::Hpc) throw UsageError("--grid applies to --algo hpc only");
  if (o.algo == Algorithm::Sequential && o.p != 1) throw UsageError("--algo sequential requires --p 1");
  if (o.p < 1) throw UsageError("--p must be >= 1");
  if (o.tol && o.no_residual) throw UsageError("--tol needs the residual; drop --no-residual");
  if (o.input && o.synthetic) throw UsageError("--input and --synthetic are mutually exclusive");
  if (!o.input && !o.synthetic) throw UsageError("one of --input or --synthetic is required");
  if (o.synthetic && *o.synthetic != "dense" && *o.synthetic != "sparse")
    throw UsageError("--synthetic must be dense or sparse");
  if (o.synthetic && (o.m < 1 || o.n < 1)) throw UsageError("--synthetic needs --m and --n");
  if (o.k < 1) throw UsageError("--k must be >= 1");
  if (o.iters < 1) throw UsageError("--iters must be >= 1");
  if (o.format != "json" && o.format != "csv" && o.format != "both")
    throw UsageError("--format must be json, csv or both");
  if (o.predict_only && o.input) throw UsageError("--predict-only works from --synthetic dimensions");
  o.model.validate();
}

inline nlohmann::json options_json(const BenchOptions& o) {
  nlohmann::json j{{"algo", to_string(o.algo)},
                   {"solver", to_string(o.solver)},
                   {"grid", o.grid.value_or("auto")},
                   {"m", o.m},
                   {"n", o.n},
                   {"k", o.k},
                   {"p", o.p},
                   {"iters", o.iters},
                   {"seed", o.seed},
                   {"residual", !o.no_residual},
                   {"mode", o.mode == ExecutionMode::Serialized ? "serialized" : "concurrent"}};
  if (o.synthetic) {
    j["synthetic"] = *o.synthetic;
    if (*o.synthetic == "sparse") j["density"] = o.density;
    else j["noise_std"] = o.noise_std;
  }
  if (o.input) j["input"] = *o.input;
  if (o.tol) j["tol"] = *o.tol;
  return j;
}

namespace detail {

/// Largest per-rank nonzero counts, for the sparse cost prediction.
inline Density density_for(const Matrix& a, Algorithm algo, const GridShape& grid) {
  if (!is_sparse(a)) return Density::dense();
  const auto& s = std::get<SparseMatrix>(a);
  const BlockMap map = partition(s.rows(), s.cols(), grid);
  std::vector<double> per_block(grid.size(), 0.0), per_row(grid.rows, 0.0), per_col(grid.rows, 0.0);
  const auto locate = [](const std::vector<Range>& blocks, std::size_t x) {
    return static_cast<std::size_t>(std::find_if(blocks.begin(), blocks.end(),
                                                 [&](const Range& r) { return r.contains(x); }) -
                                    blocks.begin());
  };
  std::vector<Range> h_ranges;
  for (std::size_t i = 0; i < grid.rows; ++i) h_ranges.push_back(map.h_block(i, 0));
  for (const auto& t : s.entries()) {
    const auto i = locate(map.row_blocks(), t.row);
    const auto j = locate(map.col_blocks(), t.col);
    per_block[i * grid.cols + j] += 1;
    if (algo == Algorithm::Naive) {
      per_row[i] += 1;
      per_col[locate(h_ranges, t.col)] += 1;
    }
  }
  if (algo == Algorithm::Naive)
    return Density::sparse_naive(*std::max_element(per_row.begin(), per_row.end()),
                                 *std::max_element(per_col.begin(), per_col.end()));
  return Density::sparse_grid(*std::max_element(per_block.begin(), per_block.end()));
}

inline GridShape grid_for(const BenchOptions& o) {
  if (o.algo == Algorithm::Sequential) return GridShape(1, 1);
  if (o.algo == Algorithm::Naive) return GridShape(o.p, 1);
  return parse_grid(o.grid.value_or("auto"), o.m, o.n, o.p);
}

inline CostEstimate predict_for(const BenchOptions& o, const GridShape& g, const Density& d) {
  if (o.algo == Algorithm::Naive) return predict_naive(o.m, o.n, o.k, o.p, d);
  return predict_hpc(o.m, o.n, o.k, g, d);
}

}  // namespace detail

/// Runs (or only predicts) one configuration and builds its report. The
/// options' m and n are overwritten from --input when given.
inline BenchReport build_report(BenchOptions o) {
  validate_options(o);
  BenchReport r;
  r.algorithm = to_string(o.algo);
  r.solver = to_string(o.solver);
  r.p = o.p;
  r.k = o.k;
  r.model = o.model;
  r.predict_only = o.predict_only;

  if (o.predict_only) {
    r.m = o.m;
    r.n = o.n;
    r.grid = detail::grid_for(o);
    Density d = Density::dense();
    if (*o.synthetic == "sparse") {
      const double nnz = o.density * static_cast<double>(o.m) * static_cast<double>(o.n);
      const double pd = static_cast<double>(o.p);
      d = o.algo == Algorithm::Naive ? Density::sparse_naive(nnz / pd, nnz / pd) : Density::sparse_grid(nnz / pd);
    }
    r.prediction = detail::predict_for(o, r.grid, d);
    r.lower_bound = bandwidth_lower_bound(o.m, o.n, o.k, o.p);
    r.config = options_json(o);
    return r;
  }

  Matrix a;
  if (o.input) {
    a = read_matrix_market(*o.input);
    o.m = rows_of(a);
    o.n = cols_of(a);
  } else if (*o.synthetic == "dense") {
    a = gen_dense_synthetic(DenseSyntheticSpec{o.m, o.n, o.seed, o.noise_std});
  } else {
    a = gen_sparse_er(SparseSyntheticSpec{o.m, o.n, o.density, o.seed});
  }
  r.m = o.m;
  r.n = o.n;
  r.grid = detail::grid_for(o);

  NmfConfig cfg;
  cfg.k = o.k;
  cfg.max_iters = o.iters;
  cfg.solver.kind = o.solver;
  cfg.seed = o.seed;
  cfg.residual_tolerance = o.tol;
  cfg.compute_residual = !o.no_residual;
  if (o.algo == Algorithm::Hpc) cfg.grid = r.grid;
  const NmfResult res = run_nmf(o.algo, a, cfg, o.p, ClusterOptions{o.mode, 0});

  r.iterations = res.iterations;
  for (std::size_t q = 0; q < res.ledger.ranks(); ++q)
    r.peak_memory_words = std::max(r.peak_memory_words, res.ledger.peak_memory_words(q));
  r.prediction = detail::predict_for(o, r.grid, detail::density_for(a, o.algo, r.grid));
  r.lower_bound = bandwidth_lower_bound(o.m, o.n, o.k, o.p);
  r.config = options_json(o);
  return r;
}

/// Writes report.json and/or report.csv into out_dir; returns the paths.
inline std::vector<std::string> emit_report(const BenchReport& r, const std::string& out_dir,
                                            const std::string& format) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> paths;
  auto open = [&](const std::string& name) {
    const auto path = (std::filesystem::path(out_dir) / name).string();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    paths.push_back(path);
    return f;
  };
  if (format == "json" || format == "both") {
    auto f = open("report.json");
    write_json(r, f);
  }
  if (format == "csv" || format == "both") {
    auto f = open("report.csv");
    write_csv(r, f);
  }
  return paths;
}

/// Full driver: exit 0 on success, 1 on solver or I/O failure, 2 on bad usage.
inline int run_bench(const BenchOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const BenchReport r = build_report(o);
    print_summary(r, out);
    for (const auto& path : emit_report(r, o.out_dir, o.format)) out << "wrote " << path << '\n';
    return static_cast<int>(ExitCode::Success);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Usage);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Usage);
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return static_cast<int>(ExitCode::SolverFailure);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::SolverFailure);
  }
}

}  // namespace hpcnmf

#endif  // HPCNMF_BENCH_HPP
