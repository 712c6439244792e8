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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace hpcnmf;
using hpcnmf::testing::random_dense;
using hpcnmf::testing::random_spd;

namespace {

DenseMatrix col(std::initializer_list<double> v) {
  DenseMatrix m(v.size(), 1);
  std::size_t i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

NormalEquations column_of(const NormalEquations& neq, std::size_t c) {
  DenseMatrix r(neq.k(), 1);
  for (std::size_t i = 0; i < neq.k(); ++i) r(i, 0) = neq.rhs(i, c);
  return {neq.gram, r};
}

double tau(const NormalEquations& neq, std::size_t c) {
  double s = 0;
  for (std::size_t i = 0; i < neq.k(); ++i) s = std::max(s, std::abs(neq.rhs(i, c)));
  return 1e-10 * (1 + s);
}

}  // namespace

TEST(MuUpdate, FixedPointWhenRhsMatchesGram) {
  std::mt19937_64 rng(1);
  const auto g = random_spd(rng, 3);
  const auto x = random_dense(rng, 3, 4, 0.5, 1.5);
  const NormalEquations neq{g, hpcnmf::testing::reference_product(g, x)};
  EXPECT_LE(hpcnmf::testing::relative_diff(mu_update(x, neq).x, x), 1e-14);
}

TEST(MuUpdate, ZeroStaysZero) {
  const NormalEquations neq{DenseMatrix::from_rows({{2, 1}, {1, 2}}), col({5, 100})};
  EXPECT_EQ(mu_update(col({1, 0}), neq).x(1, 0), 0.0);
}

TEST(MuUpdate, ScalarHandEvaluation) {
  const NormalEquations neq{DenseMatrix::from_rows({{2}}), col({6})};
  EXPECT_DOUBLE_EQ(mu_update(col({2}), neq).x(0, 0), 3.0);
}

TEST(MuUpdate, NegativePreviousIterateIsContractViolation) {
  const NormalEquations neq{DenseMatrix::from_rows({{2}}), col({6})};
  EXPECT_THROW(mu_update(col({-1}), neq), ContractViolation);
}

TEST(MuUpdate, FlopCountIsDominatedByGramProduct) {
  const NormalEquations neq{DenseMatrix::identity(3), DenseMatrix(3, 5, 1.0)};
  EXPECT_EQ(mu_update(DenseMatrix(3, 5, 1.0), neq).flops, 2u * 9 * 5 + 3u * 3 * 5);
}

TEST(HalsUpdate, ScalarProjection) {
  EXPECT_EQ(hals_update(col({1}), {DenseMatrix::from_rows({{4}}), col({-2})}).x(0, 0), 0.0);
  EXPECT_EQ(hals_update(col({1}), {DenseMatrix::from_rows({{4}}), col({8})}).x(0, 0), 2.0);
}

TEST(HalsUpdate, IdentityGramDecouplesRows) {
  std::mt19937_64 rng(2);
  const auto rhs = random_dense(rng, 4, 6);
  const auto x = hals_update(random_dense(rng, 4, 6), {DenseMatrix::identity(4), rhs}).x;
  EXPECT_EQ(x, rhs);
}

TEST(HalsUpdate, UsesMostRecentRows) {
  // x0 = [4 − 100]₊/2 = 0; row 1 then sees x0 = 0 (not the stale 100): x1 = 5.
  const NormalEquations neq{DenseMatrix::from_rows({{2, 1}, {1, 1}}), col({4, 5})};
  const auto x = hals_update(col({100, 100}), neq).x;
  EXPECT_EQ(x(0, 0), 0.0);
  EXPECT_EQ(x(1, 0), 5.0);
}

TEST(HalsUpdate, DegenerateDiagonalZeroesRow) {
  const NormalEquations neq{DenseMatrix::from_rows({{1, 0}, {0, 1e-17}}), col({1, 1})};
  const auto x = hals_update(col({1, 1}), neq).x;
  EXPECT_EQ(x(0, 0), 1.0);
  EXPECT_EQ(x(1, 0), 0.0);
}

TEST(BppSolve, IdentityGramProjects) {
  const auto r = bpp_solve({DenseMatrix::identity(2), col({1, -1})});
  EXPECT_EQ(r.x, col({1, 0}));
}

TEST(BppSolve, UnconstrainedOptimumAlreadyFeasible) {
  const auto r = bpp_solve({DenseMatrix::from_rows({{2, 1}, {1, 2}}), col({10, 11})});
  EXPECT_NEAR(r.x(0, 0), 3.0, 1e-14);
  EXPECT_NEAR(r.x(1, 0), 4.0, 1e-14);
}

TEST(BppSolve, ActiveSetFromBruteForce) {
  const NormalEquations neq{DenseMatrix::from_rows({{1, 0.9}, {0.9, 1}}), col({1, -0.5})};
  const auto r = bpp_solve(neq);
  EXPECT_NEAR(r.x(0, 0), 1.0, 1e-14);
  EXPECT_EQ(r.x(1, 0), 0.0);
  EXPECT_EQ(r.state.passive[0], 0b01u);
}

TEST(BppSolve, StateRecordsExchanges) {
  const NormalEquations neq{DenseMatrix::from_rows({{1, 0.9}, {0.9, 1}}), col({1, -0.5})};
  const auto r = bpp_solve(neq);
  ASSERT_EQ(r.state.block_exchanges.size(), 1u);
  EXPECT_GE(r.state.block_exchanges[0], 1u);
  EXPECT_FALSE(r.state.infeasibility[0].empty());
  EXPECT_GE(r.state.iterations, 1u);
}

TEST(BppSolve, ColumnsWithNegativeRhsStayZero) {
  const auto r = bpp_solve({DenseMatrix::identity(3), col({-1, -2, -3})});
  EXPECT_EQ(r.x, DenseMatrix(3, 1));
  EXPECT_EQ(r.state.iterations, 0u);
}

TEST(BppSolve, SingularGramUsesRidge) {
  // Rank-one Gram: the two-index passive set is singular without the ridge.
  const NormalEquations neq{DenseMatrix::from_rows({{1, 1}, {1, 1}}), col({1, 1})};
  const auto r = bpp_solve(neq);
  EXPECT_LE(kkt_residual(neq, r.x), 1e-6);
  EXPECT_NEAR(r.x(0, 0) + r.x(1, 0), 1.0, 1e-6);
}

TEST(BppSolve, ScaleEquivariance) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 1 + rng() % 6, r = 1 + rng() % 5;
    const auto g = random_spd(rng, k);
    const auto rhs = random_dense(rng, k, r, -1, 1);
    DenseMatrix scaled = rhs;
    for (auto& v : scaled.data()) v *= 7.5;
    auto x1 = bpp_solve({g, rhs}).x;
    const auto x2 = bpp_solve({g, scaled}).x;
    for (auto& v : x1.data()) v *= 7.5;
    EXPECT_LE(hpcnmf::testing::relative_diff(x2, x1), 1e-10);
  }
}

TEST(KktResidual, Examples) {
  EXPECT_EQ(kkt_residual({DenseMatrix::identity(2), col({1, -1})}, col({1, 0})), 0.0);
  EXPECT_EQ(kkt_residual({DenseMatrix::identity(2), col({1, 1})}, col({0, 0})), 1.0);
}

TEST(BruteForce, AgreesWithBppOnHandExamples) {
  const std::vector<NormalEquations> cases = {
      {DenseMatrix::identity(2), col({1, -1})},
      {DenseMatrix::from_rows({{2, 1}, {1, 2}}), col({10, 11})},
      {DenseMatrix::from_rows({{1, 0.9}, {0.9, 1}}), col({1, -0.5})},
  };
  for (const auto& neq : cases)
    EXPECT_LE(hpcnmf::testing::max_abs_diff(brute_force_nls(neq), bpp_solve(neq).x), 1e-12);
}

TEST(BruteForce, AllNegativeRhsGivesZero) {
  EXPECT_EQ(brute_force_nls({DenseMatrix::identity(3), col({-1, -2, -3})}), DenseMatrix(3, 1));
}

TEST(BruteForce, OptimalAmongFeasibleCandidates) {
  std::mt19937_64 rng(8);
  const auto g = random_spd(rng, 4);
  const auto rhs = random_dense(rng, 4, 1, -1, 1);
  const NormalEquations neq{g, rhs};
  const double best = nls_objective(neq, brute_force_nls(neq));
  // every nonnegative point on a coarse lattice is no better
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b)
      for (int c = 0; c < 5; ++c)
        for (int d = 0; d < 5; ++d) {
          const auto x = col({a * 0.25, b * 0.25, c * 0.25, d * 0.25});
          EXPECT_GE(nls_objective(neq, x), best - 1e-12);
        }
}

TEST(BruteForce, RejectsLargeK) {
  EXPECT_THROW(brute_force_nls({DenseMatrix::identity(13), DenseMatrix(13, 1)}), ContractViolation);
}

TEST(Solvers, AlwaysNonnegative) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 1 + rng() % 8, r = 1 + rng() % 10;
    const NormalEquations neq{random_spd(rng, k), random_dense(rng, k, r, -1, 1)};
    const auto x0 = random_dense(rng, k, r);
    for (auto kind : {SolverKind::MU, SolverKind::HALS, SolverKind::BPP}) {
      SolverChoice s;
      s.kind = kind;
      const auto out = solve_nls(s, neq, x0);
      for (double v : out.x.data()) ASSERT_GE(v, 0.0);
    }
  }
}

class Monotone : public ::testing::TestWithParam<SolverKind> {};

TEST_P(Monotone, ObjectiveNonIncreasingOverSweeps) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 10; ++t) {
    const std::size_t k = 1 + rng() % 16, r = 1 + rng() % 64;
    const auto f = random_dense(rng, 3 * k, k);
    const auto g = gram(f).matrix;
    const auto rhs = hpcnmf::testing::reference_product(transpose(f), random_dense(rng, 3 * k, r));
    const NormalEquations neq{g, rhs};
    SolverChoice s;
    s.kind = GetParam();
    DenseMatrix x = random_dense(rng, k, r, 0.1, 1.0);
    double prev = nls_objective(neq, x);
    for (int sweep = 0; sweep < 200; ++sweep) {
      x = solve_nls(s, neq, x).x;
      const double obj = nls_objective(neq, x);
      ASSERT_LE(obj, prev + 1e-12 * std::abs(prev)) << "sweep " << sweep;
      prev = obj;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(MuAndHals, Monotone, ::testing::Values(SolverKind::MU, SolverKind::HALS),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(BppSolve, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 1 + rng() % 5, r = 1 + rng() % 8;
    const NormalEquations neq{random_spd(rng, k), random_dense(rng, k, r, -1, 1)};
    const auto x = bpp_solve(neq).x;
    ASSERT_LE(hpcnmf::testing::max_abs_diff(x, brute_force_nls(neq)), 1e-8) << "instance " << t;
    for (std::size_t c = 0; c < r; ++c) {
      DenseMatrix xc(k, 1);
      for (std::size_t i = 0; i < k; ++i) xc(i, 0) = x(i, c);
      ASSERT_LE(kkt_residual(column_of(neq, c), xc), tau(neq, c)) << "instance " << t;
    }
  }
}

TEST(BppSolve, BatchedColumnsMatchColumnAtATime) {
  std::mt19937_64 rng(31);
  const NormalEquations neq{random_spd(rng, 6), random_dense(rng, 6, 40, -1, 1)};
  const auto batched = bpp_solve(neq).x;
  for (std::size_t c = 0; c < 40; ++c) {
    const auto single = bpp_solve(column_of(neq, c)).x;
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(batched(i, c), single(i, 0));
  }
}

TEST(SolverChoice, ParsesNames) {
  EXPECT_EQ(solver_from_string("mu"), SolverKind::MU);
  EXPECT_EQ(solver_from_string("hals"), SolverKind::HALS);
  EXPECT_EQ(solver_from_string("bpp"), SolverKind::BPP);
  EXPECT_THROW(solver_from_string("cg"), ConfigError);
}
