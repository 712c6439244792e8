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

#ifndef HPCNMF_COMMON_HPP
#define HPCNMF_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hpcnmf {

/// Raised when a caller breaks an operation's precondition (shapes, signs, ranges).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid run configuration (rank too large, grid does not match p, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An NLS solver failed to converge or hit an unrecoverable singular system.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double worst_kkt)
      : std::runtime_error(what), worst_kkt_(worst_kkt) {}
  double worst_kkt() const noexcept { return worst_kkt_; }

 private:
  double worst_kkt_;
};

/// Matrix Market parse failure; line() is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Ranks issued collectives that can never all match up.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Half-open index interval [begin, end).
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return end == begin; }
  bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
  friend bool operator==(const Range&, const Range&) = default;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

/// ⌈log₂ q⌉ for q ≥ 1; zero for q ≤ 1.
inline std::uint64_t ceil_log2(std::uint64_t q) noexcept {
  std::uint64_t r = 0;
  std::uint64_t v = 1;
  while (v < q) {
    v <<= 1;
    ++r;
  }
  return r;
}

}  // namespace hpcnmf

#endif  // HPCNMF_COMMON_HPP
