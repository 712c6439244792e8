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

#ifndef HPCNMF_GRID_HPP
#define HPCNMF_GRID_HPP

#include <cstddef>
#include <string>

#include "hpcnmf/common.hpp"

namespace hpcnmf {

/// Logical p_r × p_c processor grid.
struct GridShape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  GridShape() = default;
  GridShape(std::size_t pr, std::size_t pc) : rows(pr), cols(pc) {
    if (pr < 1 || pc < 1) throw ConfigError("grid dimensions must be >= 1");
  }

  std::size_t size() const noexcept { return rows * cols; }
  std::string str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Position of a rank in the grid; linear id is row-major (i·p_c + j).
struct RankId {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t linear = 0;

  static RankId from_linear(const GridShape& g, std::size_t id) {
    if (id >= g.size()) throw ContractViolation("rank id out of range");
    return RankId{id / g.cols, id % g.cols, id};
  }
  static RankId at(const GridShape& g, std::size_t i, std::size_t j) {
    if (i >= g.rows || j >= g.cols) throw ContractViolation("rank coordinates out of range");
    return RankId{i, j, i * g.cols + j};
  }
  friend bool operator==(const RankId&, const RankId&) = default;
};

}  // namespace hpcnmf

#endif  // HPCNMF_GRID_HPP
