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
#include <filesystem>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace hpcnmf;

namespace {

Matrix parse(const std::string& text) {
  std::istringstream in(text);
  return read_matrix_market(in);
}

Matrix round_trip(const Matrix& a) {
  std::ostringstream out;
  write_matrix_market(a, out);
  return parse(out.str());
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no ParseError for:\n" << text;
  return 0;
}

}  // namespace

TEST(MatrixMarket, CoordinateExample) {
  const Matrix a = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 5\n2 2 7\n");
  ASSERT_TRUE(is_sparse(a));
  EXPECT_EQ(std::get<SparseMatrix>(a).nnz(), 2u);
  const auto d = to_dense(a);
  EXPECT_EQ(d(0, 0), 5.0);
  EXPECT_EQ(d(1, 1), 7.0);
  EXPECT_EQ(d(0, 1), 0.0);
}

TEST(MatrixMarket, ArrayExample) {
  const Matrix a = parse("%%MatrixMarket matrix array real general\n2 1\n1\n2\n");
  ASSERT_FALSE(is_sparse(a));
  const auto& d = std::get<DenseMatrix>(a);
  ASSERT_EQ(d.rows(), 2u);
  ASSERT_EQ(d.cols(), 1u);
  EXPECT_EQ(d(0, 0), 1.0);
  EXPECT_EQ(d(1, 0), 2.0);
}

TEST(MatrixMarket, ArrayIsColumnMajor) {
  const auto d = std::get<DenseMatrix>(parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n"));
  EXPECT_EQ(d(0, 1), 3.0);
  EXPECT_EQ(d(1, 0), 2.0);
}

TEST(MatrixMarket, ZeroIndexRejected) {
  EXPECT_THROW(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 3\n"), ParseError);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 3\n"), 3u);
}

TEST(MatrixMarket, MalformedInputsReportLine) {
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 5\n"), 3u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 5\n2 2 1\n"), 4u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 5\n1 1 6\n"), 4u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 5\n"), 3u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n"), 3u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate complex general\n2 2 0\n"), 1u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real hermitian\n2 2 0\n"), 1u);
  EXPECT_EQ(parse_error_line("not a header\n"), 1u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix array real general\n2 x\n"), 2u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix array real general\n1 1\n1\n2\n"), 4u);
  EXPECT_THROW(parse(""), ParseError);
}

TEST(MatrixMarket, CommentsAndBlankLinesSkipped) {
  const Matrix a = parse(
      "%%MatrixMarket matrix coordinate real general\n% a comment\n\n3 2 1\n% between\n3 2 1.5\n");
  EXPECT_EQ(rows_of(a), 3u);
  EXPECT_EQ(cols_of(a), 2u);
  EXPECT_EQ(to_dense(a)(2, 1), 1.5);
}

TEST(MatrixMarket, SymmetricExpandsBothTriangles) {
  const auto s = parse("%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 4\n3 3 9\n");
  EXPECT_EQ(std::get<SparseMatrix>(s).nnz(), 3u);
  const auto d = to_dense(s);
  EXPECT_EQ(d(0, 1), 4.0);
  EXPECT_EQ(d(1, 0), 4.0);
  const auto a = std::get<DenseMatrix>(parse("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n"));
  EXPECT_EQ(a(0, 1), 2.0);
  EXPECT_EQ(a(1, 0), 2.0);
  EXPECT_EQ(a(1, 1), 3.0);
}

TEST(MatrixMarket, IntegerFieldAccepted) {
  EXPECT_EQ(to_dense(parse("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 4\n"))(0, 0), 4.0);
}

TEST(MatrixMarket, RoundTripsExamples) {
  const Matrix coord = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 5\n2 2 7\n");
  const Matrix arr = parse("%%MatrixMarket matrix array real general\n2 1\n1\n2\n");
  EXPECT_EQ(round_trip(coord), coord);
  EXPECT_EQ(round_trip(arr), arr);
  DenseMatrix zero(1, 1);
  EXPECT_EQ(round_trip(Matrix(zero)), Matrix(zero));
  const Matrix empty = SparseMatrix::from_triplets(3, 4, {});
  const Matrix back = round_trip(empty);
  EXPECT_EQ(back, empty);
  EXPECT_EQ(rows_of(back), 3u);
  EXPECT_EQ(cols_of(back), 4u);
}

TEST(MatrixMarket, RoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto d = hpcnmf::testing::random_dense(rng, 1 + t % 5, 1 + t % 7, 0.0, 1e6);
    EXPECT_EQ(round_trip(Matrix(d)), Matrix(d));
    const Matrix s = SparseMatrix::from_triplets(
        6, 5, {{0, 0, std::nextafter(1.0, 2.0)}, {5, 4, 4.9406564584124654e-324}, {2, 3, 1.0 / 3.0}});
    EXPECT_EQ(round_trip(s), s);
  }
}

TEST(MatrixMarket, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "hpcnmf_io_test.mtx").string();
  const Matrix a = gen_sparse_er(SparseSyntheticSpec{30, 20, 0.1, 5});
  write_matrix_market(a, path);
  EXPECT_EQ(read_matrix_market(path), a);
  EXPECT_EQ(load_source(MatrixSource(path)), a);
  std::filesystem::remove(path);
  EXPECT_THROW(read_matrix_market(path), ParseError);
}

TEST(Synthetic, DenseWithoutNoiseIsUnitInterval) {
  const auto d = gen_dense_synthetic(DenseSyntheticSpec{40, 30, 3, 0.0});
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 30; ++j) {
      EXPECT_GE(d(i, j), 0.0);
      EXPECT_LT(d(i, j), 1.0);
    }
}

TEST(Synthetic, DenseNoiseIsClampedAtZero) {
  const auto d = gen_dense_synthetic(DenseSyntheticSpec{60, 60, 4, 1.0});
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 60; ++j) {
      EXPECT_GE(d(i, j), 0.0);
      zeros += d(i, j) == 0.0;
    }
  EXPECT_GT(zeros, 0u);
}

TEST(Synthetic, BlocksAreGridInvariant) {
  const DenseSyntheticSpec ds{20, 14, 9, 0.1};
  const SparseSyntheticSpec ss{20, 14, 0.3, 9};
  const Matrix whole_d = gen_dense_synthetic(ds);
  const Matrix whole_s = gen_sparse_er(ss);
  for (auto g : {GridShape(1, 1), GridShape(2, 2), GridShape(3, 2), GridShape(4, 1)}) {
    const auto map = partition(20, 14, g);
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t j = 0; j < g.cols; ++j) {
        const auto rb = map.row_block(i);
        const auto cb = map.col_block(j);
        EXPECT_EQ(Matrix(gen_dense_synthetic(ds, rb, cb)), slice(whole_d, rb, cb)) << g.str();
        EXPECT_EQ(Matrix(gen_sparse_er(ss, rb, cb)), slice(whole_s, rb, cb)) << g.str();
      }
  }
}

TEST(Synthetic, SeedChangesValues) {
  EXPECT_NE(gen_dense_synthetic(DenseSyntheticSpec{5, 5, 1, 0.1}), gen_dense_synthetic(DenseSyntheticSpec{5, 5, 2, 0.1}));
}

TEST(Synthetic, FullDensityFillsEveryEntry) {
  const auto s = gen_sparse_er(SparseSyntheticSpec{17, 9, 1.0, 2});
  EXPECT_EQ(s.nnz(), 17u * 9u);
  for (const auto& t : s.entries()) {
    EXPECT_GE(t.value, 0.0);
    EXPECT_LT(t.value, 1.0);
  }
}

TEST(Synthetic, SparseCountWithinBinomialBand) {
  // mean 1000, std ≈ 31.6
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = gen_sparse_er(SparseSyntheticSpec{1000, 1000, 0.001, seed});
    EXPECT_NEAR(double(s.nnz()), 1000.0, 5 * 31.6) << seed;
  }
}

TEST(Synthetic, InvalidDensityRejected) {
  EXPECT_THROW(gen_sparse_er(SparseSyntheticSpec{4, 4, 0.0, 1}), std::invalid_argument);
  EXPECT_THROW(gen_sparse_er(SparseSyntheticSpec{4, 4, 1.5, 1}), std::invalid_argument);
}

TEST(Synthetic, PerRankPrimeStreamsDiffer) {
  const DenseSyntheticSpec ds{8, 8, 1, 0.0};
  const Range all{0, 8};
  const auto a = gen_dense_synthetic(ds, all, all, SeedMode::PerRankPrime, 0);
  const auto b = gen_dense_synthetic(ds, all, all, SeedMode::PerRankPrime, 1);
  EXPECT_NE(a, b);
  EXPECT_EQ(a, gen_dense_synthetic(ds, all, all, SeedMode::PerRankPrime, 0));
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      EXPECT_GE(a(i, j), 0.0);
      EXPECT_LT(a(i, j), 1.0);
    }
}

TEST(Distribute, SingleRankHoldsEverything) {
  const Matrix a = gen_dense_synthetic(DenseSyntheticSpec{5, 4, 1, 0.1});
  const auto map = partition(5, 4, GridShape(1, 1));
  const auto d = distribute(a, map, Layout::Grid2D);
  ASSERT_EQ(d.blocks.size(), 1u);
  EXPECT_EQ(d.blocks[0], a);
}

TEST(Distribute, TwoByTwoMatchesSlicing) {
  DenseMatrix a(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) a(i, j) = double(4 * i + j);
  const auto map = partition(4, 4, GridShape(2, 2));
  const auto d = distribute(Matrix(a), map, Layout::Grid2D);
  ASSERT_EQ(d.blocks.size(), 4u);
  // rank (1, 0) is linear id 2 and holds rows 2..3, cols 0..1
  const auto& b = std::get<DenseMatrix>(d.blocks[2]);
  EXPECT_EQ(b(0, 0), 8.0);
  EXPECT_EQ(b(1, 1), 13.0);
  const auto& last = std::get<DenseMatrix>(d.blocks[3]);
  EXPECT_EQ(last(1, 1), 15.0);
}

TEST(Distribute, NaiveDualShapes) {
  const Matrix a = gen_dense_synthetic(DenseSyntheticSpec{4, 4, 1, 0.1});
  const auto map = partition(4, 4, GridShape(2, 1));
  const auto d = distribute(a, map, Layout::NaiveDual);
  ASSERT_EQ(d.row_blocks.size(), 2u);
  ASSERT_EQ(d.col_blocks.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(rows_of(d.row_blocks[i]), 2u);
    EXPECT_EQ(cols_of(d.row_blocks[i]), 4u);
    EXPECT_EQ(rows_of(d.col_blocks[i]), 4u);
    EXPECT_EQ(cols_of(d.col_blocks[i]), 2u);
  }
  EXPECT_EQ(d.row_blocks[1], slice(a, {2, 4}, {0, 4}));
  EXPECT_EQ(d.col_blocks[1], slice(a, {0, 4}, {2, 4}));
}

TEST(Distribute, GatherInvertsDistribute) {
  const Matrix dense = gen_dense_synthetic(DenseSyntheticSpec{23, 17, 6, 0.1});
  const Matrix sparse = gen_sparse_er(SparseSyntheticSpec{23, 17, 0.2, 6});
  for (auto g : {GridShape(1, 1), GridShape(2, 3), GridShape(4, 2), GridShape(1, 5)}) {
    const auto map = partition(23, 17, g);
    EXPECT_EQ(gather_blocks(distribute(dense, map, Layout::Grid2D), map), dense) << g.str();
    EXPECT_EQ(gather_blocks(distribute(sparse, map, Layout::Grid2D), map), sparse) << g.str();
  }
}

TEST(Distribute, EmptyFactorBlockRejected) {
  // the single-row block cannot be split across two grid columns
  const Matrix a = gen_dense_synthetic(DenseSyntheticSpec{3, 3, 1, 0.1});
  EXPECT_THROW(distribute(a, partition(3, 3, GridShape(2, 2)), Layout::Grid2D), ConfigError);
  EXPECT_THROW(partition(3, 3, GridShape(4, 1)), ConfigError);
}
