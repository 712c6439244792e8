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
 * @file    nls.hpp
 * @brief   Nonnegative least squares updates in normal-equations form.
 *
 * Every solver works on a k×k Gram G = CᵀC and a k×r right-hand side
 * R = CᵀB and produces a k×r nonnegative X whose columns (approximately)
 * minimize ‖Cx − b‖². Updating W uses the same call with the roles of the
 * factors transposed.
 */

#ifndef HPCNMF_NLS_HPP
#define HPCNMF_NLS_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hpcnmf/common.hpp"
#include "hpcnmf/matrix.hpp"

namespace hpcnmf {

struct NormalEquations {
  DenseMatrix gram;  // k×k, symmetric PSD
  DenseMatrix rhs;   // k×r

  std::size_t k() const noexcept { return gram.rows(); }
  std::size_t columns() const noexcept { return rhs.cols(); }

  void validate() const {
    require(gram.rows() == gram.cols(), "gram must be square");
    require(rhs.rows() == gram.rows(), "rhs must have k rows");
    for (std::size_t a = 0; a < k(); ++a) {
      require(gram(a, a) >= 0.0, "gram diagonal must be nonnegative");
      for (std::size_t b = a + 1; b < k(); ++b)
        require(gram(a, b) == gram(b, a), "gram must be symmetric");
    }
  }
};

enum class SolverKind { MU, HALS, BPP };

inline const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::MU: return "mu";
    case SolverKind::HALS: return "hals";
    case SolverKind::BPP: return "bpp";
  }
  return "?";
}

inline SolverKind solver_from_string(const std::string& s) {
  if (s == "mu") return SolverKind::MU;
  if (s == "hals") return SolverKind::HALS;
  if (s == "bpp") return SolverKind::BPP;
  throw ConfigError("unknown solver '" + s + "'");
}

/// Solver selection with its tolerances.
struct SolverChoice {
  SolverKind kind = SolverKind::BPP;
  double mu_epsilon = 1e-16;         // added to MU denominators
  double hals_degenerate = 1e-15;    // G_ii ≤ this·max diag → row zeroed
  double kkt_tolerance = 1e-10;      // τ = kkt_tolerance·(1 + ‖rhs col‖∞)
  double bpp_ridge = 1e-12;          // ridge = bpp_ridge·trace(G)/k on singular subsystems

  void validate() const {
    if (!(mu_epsilon > 0 && hals_degenerate > 0 && kkt_tolerance > 0 && bpp_ridge > 0))
      throw ConfigError("solver tolerances must be positive");
  }
};

struct NlsUpdate {
  DenseMatrix x;
  std::uint64_t flops = 0;
};

namespace detail {

inline void require_nonnegative(const DenseMatrix& x, const char* who) {
  for (double v : x.data())
    if (v < 0.0) throw ContractViolation(std::string(who) + ": previous iterate has a negative entry");
}

inline double column_inf_norm(const DenseMatrix& m, std::size_t c) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s = std::max(s, std::abs(m(i, c)));
  return s;
}

}  // namespace detail

/// Multiplicative update X ← X ⊙ R ⊘ (G X + ε), clamped at zero.
inline NlsUpdate mu_update(const DenseMatrix& x_prev, const NormalEquations& neq,
                           double epsilon = 1e-16) {
  const std::size_t k = neq.k();
  const std::size_t r = neq.columns();
  require(x_prev.rows() == k && x_prev.cols() == r, "mu_update: X shape mismatch");
  detail::require_nonnegative(x_prev, "mu_update");
  DenseMatrix x(k, r);
  for (std::size_t c = 0; c < r; ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      double gx = 0.0;
      for (std::size_t l = 0; l < k; ++l) gx += neq.gram(i, l) * x_prev(l, c);
      x(i, c) = std::max(0.0, x_prev(i, c) * neq.rhs(i, c) / (gx + epsilon));
    }
  }
  return {std::move(x), 2ULL * k * k * r + 3ULL * k * r};
}

/// One HALS sweep over the rows of X, in order, using already-updated rows.
inline NlsUpdate hals_update(const DenseMatrix& x_prev, const NormalEquations& neq,
                             double degenerate_ratio = 1e-15) {
  const std::size_t k = neq.k();
  const std::size_t r = neq.columns();
  require(x_prev.rows() == k && x_prev.cols() == r, "hals_update: X shape mismatch");
  detail::require_nonnegative(x_prev, "hals_update");
  DenseMatrix x = x_prev;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) max_diag = std::max(max_diag, neq.gram(i, i));
  for (std::size_t i = 0; i < k; ++i) {
    const double gii = neq.gram(i, i);
    if (gii <= degenerate_ratio * max_diag) {
      for (std::size_t c = 0; c < r; ++c) x(i, c) = 0.0;
      continue;
    }
    for (std::size_t c = 0; c < r; ++c) {
      double v = neq.rhs(i, c);
      for (std::size_t l = 0; l < k; ++l)
        if (l != i) v -= neq.gram(l, i) * x(l, c);
      x(i, c) = std::max(v, 0.0) / gii;
    }
  }
  return {std::move(x), 2ULL * k * k * r};
}

/// max over columns of max(‖min(x,0)‖∞, ‖min(Gx−R,0)‖∞, ‖x⊙(Gx−R)‖∞).
inline double kkt_residual(const NormalEquations& neq, const DenseMatrix& x) {
  const std::size_t k = neq.k();
  require(x.rows() == k && x.cols() == neq.columns(), "kkt_residual: X shape mismatch");
  double worst = 0.0;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      double y = -neq.rhs(i, c);
      for (std::size_t l = 0; l < k; ++l) y += neq.gram(i, l) * x(l, c);
      const double xi = x(i, c);
      worst = std::max({worst, std::max(-xi, 0.0), std::max(-y, 0.0), std::abs(xi * y)});
    }
  }
  return worst;
}

/// Per-column pivoting record of a bpp_solve call.
struct BppState {
  std::vector<std::uint64_t> passive;                   // bit i set ⇔ index i passive
  std::vector<std::vector<std::size_t>> infeasibility;  // violation count before each exchange
  std::vector<int> backup_left;                         // full exchanges left before single-exchange rule
  std::vector<std::size_t> block_exchanges;
  std::vector<std::size_t> single_exchanges;
  std::size_t iterations = 0;
};

struct BppResult {
  DenseMatrix x;
  BppState state;
  std::uint64_t flops = 0;
};

namespace detail {

/// Cholesky factor (lower, row-major, long double) of G restricted to `idx`,
/// with `ridge` added to the diagonal. Empty optional when not positive definite.
inline std::optional<std::vector<long double>> restricted_cholesky(const DenseMatrix& g,
                                                                   const std::vector<std::size_t>& idx,
                                                                   double ridge) {
  const std::size_t f = idx.size();
  std::vector<long double> l(f * f, 0.0L);
  long double max_diag = 0.0L;
  for (std::size_t a = 0; a < f; ++a)
    max_diag = std::max(max_diag, static_cast<long double>(g(idx[a], idx[a])) + ridge);
  const long double floor = max_diag * 1e-13L;
  for (std::size_t a = 0; a < f; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      long double s = g(idx[a], idx[b]);
      if (a == b) s += ridge;
      for (std::size_t c = 0; c < b; ++c) s -= l[a * f + c] * l[b * f + c];
      if (a == b) {
        if (!(s > floor) || s <= 0.0L) return std::nullopt;
        l[a * f + a] = std::sqrt(s);
      } else {
        l[a * f + b] = s / l[b * f + b];
      }
    }
  }
  return l;
}

inline std::vector<std::size_t> mask_indices(std::uint64_t mask, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < k; ++i)
    if (mask >> i & 1ULL) idx.push_back(i);
  return idx;
}

}  // namespace detail

/// Block principal pivoting (full exchange with the 3-strike single-exchange
/// backup rule). Columns that share a passive set share one factorization.
inline BppResult bpp_solve(const NormalEquations& neq, const SolverChoice& opts = {}) {
  const std::size_t k = neq.k();
  const std::size_t r = neq.columns();
  require(neq.gram.cols() == k && neq.rhs.rows() == k, "bpp_solve: shape mismatch");
  require(k >= 1 && k <= 64, "bpp_solve supports 1 <= k <= 64");
  const auto& g = neq.gram;
  const auto& rhs = neq.rhs;

  BppResult res;
  auto& st = res.state;
  st.passive.assign(r, 0);
  st.infeasibility.assign(r, {});
  st.backup_left.assign(r, 3);
  st.block_exchanges.assign(r, 0);
  st.single_exchanges.assign(r, 0);

  DenseMatrix x(k, r);
  DenseMatrix y(k, r);
  std::vector<double> tau(r);
  std::vector<std::size_t> best(r, k + 1);
  for (std::size_t c = 0; c < r; ++c) {
    tau[c] = opts.kkt_tolerance * (1.0 + detail::column_inf_norm(rhs, c));
    for (std::size_t i = 0; i < k; ++i) y(i, c) = -rhs(i, c);
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < k; ++i) trace += g(i, i);
  const double ridge = opts.bpp_ridge * trace / static_cast<double>(k);
  const std::size_t max_block = 5 * k;
  const std::size_t max_single = k;

  auto violations = [&](std::size_t c) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const bool passive = st.passive[c] >> i & 1ULL;
      if (passive ? x(i, c) < -tau[c] : y(i, c) < -tau[c]) v |= 1ULL << i;
    }
    return v;
  };

  auto fail = [&](const std::string& why) {
    throw SolverError("bpp_solve: " + why, kkt_residual(neq, x));
  };

  for (;;) {
    std::map<std::uint64_t, std::vector<std::size_t>> groups;
    for (std::size_t c = 0; c < r; ++c) {
      const std::uint64_t v = violations(c);
      if (!v) continue;
      const auto ninf = static_cast<std::size_t>(std::popcount(v));
      st.infeasibility[c].push_back(ninf);
      if (ninf < best[c]) {
        best[c] = ninf;
        st.backup_left[c] = 3;
        st.passive[c] ^= v;
        ++st.block_exchanges[c];
      } else if (st.backup_left[c] >= 1) {
        --st.backup_left[c];
        st.passive[c] ^= v;
        ++st.block_exchanges[c];
      } else {
        st.passive[c] ^= 1ULL << (63 - std::countl_zero(v));
        ++st.single_exchanges[c];
      }
      if (st.block_exchanges[c] > max_block || st.single_exchanges[c] > max_single)
        fail("no convergence in column " + std::to_string(c));
      groups[st.passive[c]].push_back(c);
    }
    if (groups.empty()) break;
    ++st.iterations;

    for (const auto& [mask, cols] : groups) {
      const auto pas = detail::mask_indices(mask, k);
      const auto act = detail::mask_indices(~mask & (k == 64 ? ~0ULL : ((1ULL << k) - 1)), k);
      const std::size_t f = pas.size();
      std::vector<long double> l;
      if (f > 0) {
        auto chol = detail::restricted_cholesky(g, pas, 0.0);
        if (!chol) chol = detail::restricted_cholesky(g, pas, ridge);
        if (!chol) fail("singular passive-set subsystem");
        l = std::move(*chol);
        res.flops += f * f * f / 3;
      }
      std::vector<long double> z(f);
      for (std::size_t c : cols) {
        // forward then backward substitution on L Lᵀ x_F = R_F
        for (std::size_t a = 0; a < f; ++a) {
          long double s = rhs(pas[a], c);
          for (std::size_t b = 0; b < a; ++b) s -= l[a * f + b] * z[b];
          z[a] = s / l[a * f + a];
        }
        for (std::size_t a = f; a-- > 0;) {
          long double s = z[a];
          for (std::size_t b = a + 1; b < f; ++b) s -= l[b * f + a] * z[b];
          z[a] = s / l[a * f + a];
        }
        for (std::size_t i = 0; i < k; ++i) {
          x(i, c) = 0.0;
          y(i, c) = 0.0;
        }
        for (std::size_t a = 0; a < f; ++a) x(pas[a], c) = static_cast<double>(z[a]);
        for (std::size_t i : act) {
          long double s = -static_cast<long double>(rhs(i, c));
          for (std::size_t a = 0; a < f; ++a) s += static_cast<long double>(g(i, pas[a])) * z[a];
          y(i, c) = static_cast<double>(s);
        }
        res.flops += 2 * f * f + 2 * act.size() * f;
      }
    }
  }

  for (double& v : x.data()) v = std::max(v, 0.0);
  res.x = std::move(x);
  return res;
}

namespace detail {

/// Gaussian elimination with partial pivoting on G restricted to idx.
/// Empty optional on a (numerically) singular system.
inline std::optional<std::vector<double>> restricted_gauss_solve(const DenseMatrix& g,
                                                                 const std::vector<std::size_t>& idx,
                                                                 const std::vector<double>& b) {
  const std::size_t f = idx.size();
  std::vector<double> a(f * (f + 1));
  double scale = 0.0;
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      a[i * (f + 1) + j] = g(idx[i], idx[j]);
      scale = std::max(scale, std::abs(g(idx[i], idx[j])));
    }
    a[i * (f + 1) + f] = b[i];
  }
  for (std::size_t col = 0; col < f; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < f; ++i)
      if (std::abs(a[i * (f + 1) + col]) > std::abs(a[piv * (f + 1) + col])) piv = i;
    if (std::abs(a[piv * (f + 1) + col]) <= 1e-14 * scale || scale == 0.0) return std::nullopt;
    if (piv != col)
      for (std::size_t j = 0; j <= f; ++j) std::swap(a[col * (f + 1) + j], a[piv * (f + 1) + j]);
    for (std::size_t i = col + 1; i < f; ++i) {
      const double m = a[i * (f + 1) + col] / a[col * (f + 1) + col];
      for (std::size_t j = col; j <= f; ++j) a[i * (f + 1) + j] -= m * a[col * (f + 1) + j];
    }
  }
  std::vector<double> x(f);
  for (std::size_t i = f; i-- > 0;) {
    double s = a[i * (f + 1) + f];
    for (std::size_t j = i + 1; j < f; ++j) s -= a[i * (f + 1) + j] * x[j];
    x[i] = s / a[i * (f + 1) + i];
  }
  return x;
}

}  // namespace detail

/// Test oracle: enumerate all 2^k passive sets per column and keep the feasible
/// candidate with the smallest ½xᵀGx − Rᵀx. Independent of the bpp_solve path.
inline DenseMatrix brute_force_nls(const NormalEquations& neq) {
  const std::size_t k = neq.k();
  const std::size_t r = neq.columns();
  if (k > 12) throw ContractViolation("brute_force_nls: k must be <= 12");
  constexpr double feas = 1e-12;
  DenseMatrix out(k, r);
  for (std::size_t c = 0; c < r; ++c) {
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<double> best_x(k, 0.0);
    bool found = false;
    for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
      const auto pas = detail::mask_indices(mask, k);
      std::vector<double> b(pas.size());
      for (std::size_t a = 0; a < pas.size(); ++a) b[a] = neq.rhs(pas[a], c);
      std::vector<double> xf;
      if (!pas.empty()) {
        auto sol = detail::restricted_gauss_solve(neq.gram, pas, b);
        if (!sol) continue;
        xf = std::move(*sol);
      }
      std::vector<double> xv(k, 0.0);
      bool ok = true;
      for (std::size_t a = 0; a < pas.size(); ++a) {
        xv[pas[a]] = xf[a];
        ok = ok && xf[a] >= -feas;
      }
      if (!ok) continue;
      for (std::size_t i = 0; i < k && ok; ++i) {
        if (mask >> i & 1ULL) continue;
        double y = -neq.rhs(i, c);
        for (std::size_t l = 0; l < k; ++l) y += neq.gram(i, l) * xv[l];
        ok = y >= -feas;
      }
      if (!ok) continue;
      double obj = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        double gx = 0.0;
        for (std::size_t l = 0; l < k; ++l) gx += neq.gram(i, l) * xv[l];
        obj += 0.5 * xv[i] * gx - neq.rhs(i, c) * xv[i];
      }
      if (obj < best_obj) {
        best_obj = obj;
        best_x = xv;
        found = true;
      }
    }
    if (!found) throw SolverError("brute_force_nls: no feasible passive set", 0.0);
    for (std::size_t i = 0; i < k; ++i) out(i, c) = std::max(best_x[i], 0.0);
  }
  return out;
}

/// ½tr(XᵀGX) − tr(RᵀX).
inline double nls_objective(const NormalEquations& neq, const DenseMatrix& x) {
  double obj = 0.0;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < neq.k(); ++i) {
      double gx = 0.0;
      for (std::size_t l = 0; l < neq.k(); ++l) gx += neq.gram(i, l) * x(l, c);
      obj += 0.5 * x(i, c) * gx - neq.rhs(i, c) * x(i, c);
    }
  }
  return obj;
}

/// Dispatches one local update. x_prev is ignored by BPP.
inline NlsUpdate solve_nls(const SolverChoice& choice, const NormalEquations& neq,
                           const DenseMatrix& x_prev) {
  switch (choice.kind) {
    case SolverKind::MU: return mu_update(x_prev, neq, choice.mu_epsilon);
    case SolverKind::HALS: return hals_update(x_prev, neq, choice.hals_degenerate);
    case SolverKind::BPP: {
      auto r = bpp_solve(neq, choice);
      return {std::move(r.x), r.flops};
    }
  }
  throw ConfigError("unknown solver");
}

}  // namespace hpcnmf

#endif  // HPCNMF_NLS_HPP
