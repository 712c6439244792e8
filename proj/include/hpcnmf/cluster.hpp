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
 * @file    cluster.hpp
 * @brief   Deterministic in-process SPMD cluster with grid-aware collectives
 *          and α-β-γ cost accounting.
 *
 * Every rank runs the same program on its own thread. The only cross-rank
 * channel is a collective call, which is a rendezvous for its group: the
 * last member to arrive combines the contributions (sums use a fixed binary
 * tree keyed by group rank, never arrival order) and releases the others.
 *
 * Two schedules are available. Concurrent lets up to `max_workers` ranks run
 * at once. Serialized runs exactly one rank at a time and hands control to
 * the next runnable rank (cyclic by id) whenever the current one blocks or
 * finishes. Both produce bitwise-identical results.
 *
 * Each call is tagged with (group, per-group sequence number). A rank whose
 * call disagrees with the group's call under the same tag, or a state where
 * no rank can make progress, aborts the run with DeadlockError.
 */

#ifndef HPCNMF_CLUSTER_HPP
#define HPCNMF_CLUSTER_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "hpcnmf/common.hpp"
#include "hpcnmf/grid.hpp"

namespace hpcnmf {

enum class Category : std::size_t { MM, NLS, Gram, AllGather, ReduceScatter, AllReduce, Other };
inline constexpr std::size_t kCategoryCount = 7;
inline constexpr std::array<const char*, kCategoryCount> kCategoryNames = {
    "MM", "NLS", "Gram", "AllGather", "ReduceScatter", "AllReduce", "Other"};
inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::MM,           Category::NLS,       Category::Gram, Category::AllGather,
    Category::ReduceScatter, Category::AllReduce, Category::Other};

inline const char* to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }
inline bool is_communication(Category c) {
  return c == Category::AllGather || c == Category::ReduceScatter || c == Category::AllReduce;
}

struct Tally {
  double words = 0;
  double messages = 0;
  double flops = 0;
  double wall_seconds = 0;

  Tally& operator+=(const Tally& o) {
    words += o.words;
    messages += o.messages;
    flops += o.flops;
    wall_seconds += o.wall_seconds;
    return *this;
  }
  friend Tally operator-(Tally a, const Tally& b) {
    a.words -= b.words;
    a.messages -= b.messages;
    a.flops -= b.flops;
    a.wall_seconds -= b.wall_seconds;
    return a;
  }
};

using CategoryTallies = std::array<Tally, kCategoryCount>;

/// Latency (per message), inverse bandwidth (per word) and per-flop time.
struct ModelParams {
  double alpha = 0;
  double beta = 0;
  double gamma = 0;

  void validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0) throw ConfigError("model parameters must be >= 0");
  }
};

inline double modeled_time(const Tally& t, const ModelParams& p) {
  return p.alpha * t.messages + p.beta * t.words + p.gamma * t.flops;
}

/// Per-rank, per-category tallies merged after a run.
class CostLedger {
 public:
  explicit CostLedger(std::size_t ranks = 0) : tallies_(ranks), peak_memory_(ranks, 0.0) {}

  std::size_t ranks() const noexcept { return tallies_.size(); }
  CategoryTallies& rank(std::size_t r) { return tallies_.at(r); }
  const CategoryTallies& rank(std::size_t r) const { return tallies_.at(r); }
  const Tally& at(std::size_t r, Category c) const { return tallies_.at(r)[static_cast<std::size_t>(c)]; }

  Tally total(std::size_t r) const {
    Tally t;
    for (const auto& c : tallies_.at(r)) t += c;
    return t;
  }
  /// Sum over the three collective categories.
  Tally communication(std::size_t r) const {
    Tally t;
    for (auto c : kAllCategories)
      if (is_communication(c)) t += at(r, c);
    return t;
  }

  double peak_memory_words(std::size_t r) const { return peak_memory_.at(r); }
  void set_peak_memory_words(std::size_t r, double w) { peak_memory_.at(r) = w; }

 private:
  std::vector<CategoryTallies> tallies_;
  std::vector<double> peak_memory_;
};

struct ModeledTime {
  std::vector<std::array<double, kCategoryCount>> per_rank_category;
  std::vector<double> per_rank;
  double critical_path = 0;
};

/// α·messages + β·words + γ·flops per rank and category; the critical path is
/// the max over ranks of the per-rank sum.
inline ModeledTime ledger_modeled_time(const CostLedger& ledger, const ModelParams& params) {
  ModeledTime out;
  for (std::size_t r = 0; r < ledger.ranks(); ++r) {
    std::array<double, kCategoryCount> cats{};
    double sum = 0;
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      cats[c] = modeled_time(ledger.rank(r)[c], params);
      sum += cats[c];
    }
    out.per_rank_category.push_back(cats);
    out.per_rank.push_back(sum);
    out.critical_path = std::max(out.critical_path, sum);
  }
  return out;
}

/// A set of ranks taking part in a collective: everyone, one grid row, or one grid column.
struct CommGroup {
  enum class Kind { All, Row, Col };
  Kind kind = Kind::All;
  std::size_t index = 0;               // row or column index for Row/Col
  std::vector<std::size_t> members;    // linear rank ids in group order
  std::size_t position = 0;            // this rank's index within members

  std::size_t size() const noexcept { return members.size(); }
  std::size_t key() const noexcept {
    return kind == Kind::All ? 0 : (kind == Kind::Row ? 1 + 2 * index : 2 + 2 * index);
  }
  std::string name() const {
    switch (kind) {
      case Kind::All: return "world";
      case Kind::Row: return "row" + std::to_string(index);
      case Kind::Col: return "col" + std::to_string(index);
    }
    return "?";
  }
};

enum class ExecutionMode { Concurrent, Serialized };

struct ClusterOptions {
  ExecutionMode mode = ExecutionMode::Concurrent;
  std::size_t max_workers = 0;  // 0: $HPCNMF_WORKERS, else hardware concurrency
};

inline std::size_t default_worker_count() {
  if (const char* env = std::getenv("HPCNMF_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

enum class CollectiveOp { AllGather, ReduceScatter, AllReduce };

inline const char* to_string(CollectiveOp op) {
  switch (op) {
    case CollectiveOp::AllGather: return "all_gather";
    case CollectiveOp::ReduceScatter: return "reduce_scatter";
    case CollectiveOp::AllReduce: return "all_reduce";
  }
  return "?";
}

/// Thrown into ranks that are woken because another rank failed.
struct Aborted {};

/// Elementwise sum of inputs[lo, hi) as a balanced binary tree: ((0+1)+(2+3))...
inline std::vector<double> tree_sum(const std::vector<std::vector<double>>& inputs, std::size_t lo,
                                    std::size_t hi) {
  if (hi - lo == 1) return inputs[lo];
  const std::size_t mid = lo + (hi - lo + 1) / 2;
  auto left = tree_sum(inputs, lo, mid);
  const auto right = tree_sum(inputs, mid, hi);
  for (std::size_t e = 0; e < left.size(); ++e) left[e] += right[e];
  return left;
}

class Hub {
 public:
  Hub(std::size_t ranks, ExecutionMode mode, std::size_t max_workers)
      : mode_(mode),
        max_running_(mode == ExecutionMode::Serialized ? 1 : std::max<std::size_t>(1, max_workers)),
        status_(ranks, Status::Ready),
        waiting_on_(ranks),
        seq_(ranks) {}

  void start(std::size_t rank) {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return failed_ || can_run(rank); });
    if (failed_) throw Aborted{};
    ++running_;
    status_[rank] = Status::Running;
  }

  void finish(std::size_t rank) {
    std::unique_lock lk(mu_);
    if (status_[rank] == Status::Running) --running_;
    status_[rank] = Status::Done;
    hand_off(rank);
    check_deadlock();
    cv_.notify_all();
  }

  void fail(std::exception_ptr e) {
    std::unique_lock lk(mu_);
    fail_locked(std::move(e));
  }

  std::exception_ptr error() const { return error_; }

  /// Contributes `data` to the group's next collective and returns this rank's
  /// share of the combined result.
  std::vector<double> exchange(std::size_t rank, const CommGroup& group, CollectiveOp op,
                               std::span<const double> data, const std::vector<std::size_t>& counts) {
    std::unique_lock lk(mu_);
    if (failed_) throw Aborted{};
    const std::size_t seq = seq_[rank][group.key()]++;
    const Key key{group.key(), seq};
    const std::string tag = group.name() + "#" + std::to_string(seq);
    auto [it, fresh] = slots_.try_emplace(key);
    Slot& slot = it->second;
    if (fresh) {
      slot.op = op;
      slot.tag = tag;
      slot.counts = counts;
      slot.members = group.members;
      slot.inputs.resize(group.size());
      slot.arrived.assign(group.size(), false);
    } else if (slot.op != op || slot.counts != counts || slot.members != group.members) {
      fail_locked(std::make_exception_ptr(DeadlockError(
          "rank " + std::to_string(rank) + " diverged at collective tag " + tag + ": called " +
          to_string(op) + " but the group issued " + to_string(slot.op))));
      throw Aborted{};
    }
    slot.inputs[group.position].assign(data.begin(), data.end());
    slot.arrived[group.position] = true;
    ++slot.arrived_count;

    if (slot.arrived_count == group.size()) {
      combine(slot);
      for (std::size_t member : slot.members)
        if (member != rank && status_[member] == Status::Blocked) status_[member] = Status::Ready;
      cv_.notify_all();
    } else {
      status_[rank] = Status::Blocked;
      waiting_on_[rank] = key;
      --running_;
      hand_off(rank);
      check_deadlock();
      cv_.notify_all();
      cv_.wait(lk, [&] { return failed_ || (slot.ready && can_run(rank)); });
      if (failed_) throw Aborted{};
      ++running_;
      status_[rank] = Status::Running;
      waiting_on_[rank].reset();
    }

    std::vector<double> out;
    if (op == CollectiveOp::ReduceScatter) {
      std::size_t off = 0;
      for (std::size_t g = 0; g < group.position; ++g) off += counts[g];
      out.assign(slot.combined.begin() + static_cast<std::ptrdiff_t>(off),
                 slot.combined.begin() + static_cast<std::ptrdiff_t>(off + counts[group.position]));
    } else {
      out = slot.combined;
    }
    if (++slot.departed == group.size()) slots_.erase(it);
    return out;
  }

 private:
  enum class Status { Ready, Running, Blocked, Done };
  using Key = std::pair<std::size_t, std::size_t>;

  struct Slot {
    CollectiveOp op{};
    std::string tag;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> members;
    std::vector<std::vector<double>> inputs;
    std::vector<bool> arrived;
    std::size_t arrived_count = 0;
    std::size_t departed = 0;
    bool ready = false;
    std::vector<double> combined;
  };

  bool can_run(std::size_t rank) const {
    if (mode_ == ExecutionMode::Serialized) return active_ == rank;
    return running_ < max_running_;
  }

  // Serialized mode: pass control to the next runnable rank after `from`.
  void hand_off(std::size_t from) {
    if (mode_ != ExecutionMode::Serialized || active_ != from) return;
    const std::size_t p = status_.size();
    for (std::size_t step = 1; step <= p; ++step) {
      const std::size_t r = (from + step) % p;
      if (status_[r] == Status::Ready) {
        active_ = r;
        return;
      }
    }
  }

  void combine(Slot& slot) {
    if (slot.op == CollectiveOp::AllGather) {
      for (const auto& in : slot.inputs) slot.combined.insert(slot.combined.end(), in.begin(), in.end());
    } else {
      slot.combined = tree_sum(slot.inputs, 0, slot.inputs.size());
    }
    slot.inputs.clear();
    slot.ready = true;
  }

  void check_deadlock() {
    if (failed_) return;
    bool all_done = true;
    for (auto s : status_) {
      if (s == Status::Ready || s == Status::Running) return;
      all_done = all_done && s == Status::Done;
    }
    if (all_done) return;
    fail_locked(std::make_exception_ptr(DeadlockError(describe_deadlock())));
  }

  std::string describe_deadlock() const {
    for (const auto& [key, slot] : slots_) {
      if (slot.ready) continue;
      for (std::size_t g = 0; g < slot.members.size(); ++g) {
        if (slot.arrived[g]) continue;
        const std::size_t r = slot.members[g];
        std::string where = "finished";
        if (waiting_on_[r]) where = "blocked on " + slots_.at(*waiting_on_[r]).tag + " (" +
                                    to_string(slots_.at(*waiting_on_[r]).op) + ")";
        std::string issued;
        for (std::size_t h = 0; h < slot.members.size(); ++h)
          if (slot.arrived[h]) issued += (issued.empty() ? "" : ", ") + std::to_string(slot.members[h]);
        return "collective deadlock: " + std::string(to_string(slot.op)) + " tag " + slot.tag + " issued by rank " +
               issued + " never received rank " + std::to_string(r) + ", which is " + where;
      }
    }
    return "collective deadlock";
  }

  void fail_locked(std::exception_ptr e) {
    if (!failed_) {
      failed_ = true;
      error_ = std::move(e);
    }
    cv_.notify_all();
  }

  std::mutex mu_;
  std::condition_variable cv_;
  ExecutionMode mode_;
  std::size_t max_running_;
  std::size_t running_ = 0;
  std::size_t active_ = 0;
  std::vector<Status> status_;
  std::vector<std::optional<Key>> waiting_on_;
  std::vector<std::map<std::size_t, std::size_t>> seq_;
  std::map<Key, Slot> slots_;
  bool failed_ = false;
  std::exception_ptr error_;
};

}  // namespace detail

/// A rank's handle on the cluster: its coordinates, its groups, the
/// collectives and its private cost tallies.
class Comm {
 public:
  Comm(detail::Hub& hub, GridShape grid, std::size_t linear)
      : hub_(&hub), grid_(grid), rank_(RankId::from_linear(grid, linear)) {}

  const RankId& rank() const noexcept { return rank_; }
  const GridShape& grid() const noexcept { return grid_; }

  CommGroup world() const {
    CommGroup g{CommGroup::Kind::All, 0, {}, rank_.linear};
    for (std::size_t r = 0; r < grid_.size(); ++r) g.members.push_back(r);
    return g;
  }
  /// The p_c ranks sharing this rank's grid row.
  CommGroup row_group() const {
    CommGroup g{CommGroup::Kind::Row, rank_.row, {}, rank_.col};
    for (std::size_t j = 0; j < grid_.cols; ++j) g.members.push_back(rank_.row * grid_.cols + j);
    return g;
  }
  /// The p_r ranks sharing this rank's grid column.
  CommGroup col_group() const {
    CommGroup g{CommGroup::Kind::Col, rank_.col, {}, rank_.row};
    for (std::size_t i = 0; i < grid_.rows; ++i) g.members.push_back(i * grid_.cols + rank_.col);
    return g;
  }

  /// Concatenation of every member's block in group order. All blocks have
  /// local.size() words.
  std::vector<double> all_gather(const CommGroup& g, std::span<const double> local,
                                 Category cat = Category::AllGather) {
    return all_gather(g, local, std::vector<std::size_t>(g.size(), local.size()), cat);
  }

  /// Variant with per-member block sizes; `counts` must be identical on every
  /// member and counts[position] must equal local.size().
  std::vector<double> all_gather(const CommGroup& g, std::span<const double> local,
                                 const std::vector<std::size_t>& counts,
                                 Category cat = Category::AllGather) {
    check_counts(g, counts, local.size(), "all_gather");
    const double total = sum(counts);
    return run(g, detail::CollectiveOp::AllGather, local, counts, cat,
               [&](Tally& t, double q) {
                 t.messages += static_cast<double>(ceil_log2(static_cast<std::uint64_t>(q)));
                 t.words += (q - 1) * total / q;
               });
  }

  /// Elementwise group sum of `local`, returning block `position` of it;
  /// `blocks` gives every member's block size and sums to local.size().
  std::vector<double> reduce_scatter(const CommGroup& g, std::span<const double> local,
                                     const std::vector<std::size_t>& blocks,
                                     Category cat = Category::ReduceScatter) {
    require(blocks.size() == g.size(), "reduce_scatter: one block size per member required");
    require(sum(blocks) == static_cast<double>(local.size()), "reduce_scatter: blocks must cover the input");
    const double n = static_cast<double>(local.size());
    return run(g, detail::CollectiveOp::ReduceScatter, local, blocks, cat, [&](Tally& t, double q) {
      t.messages += static_cast<double>(ceil_log2(static_cast<std::uint64_t>(q)));
      t.words += (q - 1) * n / q;
      t.flops += (q - 1) * n / q;
    });
  }

  std::vector<double> all_reduce(const CommGroup& g, std::span<const double> local,
                                 Category cat = Category::AllReduce) {
    const double n = static_cast<double>(local.size());
    return run(g, detail::CollectiveOp::AllReduce, local, std::vector<std::size_t>(1, local.size()), cat,
               [&](Tally& t, double q) {
                 t.messages += 2.0 * static_cast<double>(ceil_log2(static_cast<std::uint64_t>(q)));
                 t.words += 2.0 * (q - 1) * n / q;
                 t.flops += (q - 1) * n / q;
               });
  }

  void add_flops(Category c, double flops) { tally(c).flops += flops; }

  /// Runs f and charges its wall-clock time to category c.
  template <class F>
  decltype(auto) timed(Category c, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Charge {
      Comm* self;
      Category c;
      std::chrono::steady_clock::time_point t0;
      ~Charge() {
        self->tally(c).wall_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
    } charge{this, c, t0};
    return std::forward<F>(f)();
  }

  /// Records the current local footprint; the ledger keeps the peak.
  void note_memory(double words) { peak_memory_ = std::max(peak_memory_, words); }
  double peak_memory_words() const noexcept { return peak_memory_; }

  const CategoryTallies& tallies() const noexcept { return tallies_; }
  Tally& tally(Category c) { return tallies_[static_cast<std::size_t>(c)]; }

 private:
  static double sum(const std::vector<std::size_t>& v) {
    double s = 0;
    for (auto x : v) s += static_cast<double>(x);
    return s;
  }

  static void check_counts(const CommGroup& g, const std::vector<std::size_t>& counts, std::size_t local,
                           const char* who) {
    require(counts.size() == g.size(), std::string(who) + ": one count per member required");
    require(counts[g.position] == local, std::string(who) + ": local block size disagrees with counts");
  }

  template <class Charge>
  std::vector<double> run(const CommGroup& g, detail::CollectiveOp op, std::span<const double> local,
                          const std::vector<std::size_t>& counts, Category cat, Charge&& charge) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> out;
    if (g.size() == 1) {
      out.assign(local.begin(), local.end());
    } else {
      out = hub_->exchange(rank_.linear, g, op, local, counts);
      charge(tally(cat), static_cast<double>(g.size()));
    }
    tally(cat).wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

  detail::Hub* hub_;
  GridShape grid_;
  RankId rank_;
  CategoryTallies tallies_{};
  double peak_memory_ = 0;
};

template <class R>
struct VirtualRun {
  std::vector<R> outputs;  // indexed by linear rank id
  CostLedger ledger;
};

/// Runs `program(Comm&)` on every rank of `grid` and merges the per-rank
/// tallies. Rethrows the first rank failure (or a DeadlockError).
template <class Program>
auto run_virtual(GridShape grid, Program&& program, ClusterOptions opts = {})
    -> VirtualRun<std::invoke_result_t<Program&, Comm&>> {
  using R = std::invoke_result_t<Program&, Comm&>;
  const std::size_t p = grid.size();
  const std::size_t workers = opts.max_workers ? opts.max_workers : default_worker_count();
  detail::Hub hub(p, opts.mode, workers);
  std::vector<std::optional<R>> results(p);
  std::vector<CategoryTallies> tallies(p);
  std::vector<double> peaks(p, 0.0);

  auto body = [&](std::size_t r) {
    Comm comm(hub, grid, r);
    try {
      hub.start(r);
      results[r].emplace(program(comm));
    } catch (const detail::Aborted&) {
    } catch (...) {
      hub.fail(std::current_exception());
    }
    tallies[r] = comm.tallies();
    peaks[r] = comm.peak_memory_words();
    hub.finish(r);
  };

  if (p == 1) {
    body(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(p);
    for (std::size_t r = 0; r < p; ++r) threads.emplace_back(body, r);
    for (auto& t : threads) t.join();
  }
  if (auto e = hub.error()) std::rethrow_exception(e);

  VirtualRun<R> run{{}, CostLedger(p)};
  run.outputs.reserve(p);
  for (std::size_t r = 0; r < p; ++r) {
    run.outputs.push_back(std::move(*results[r]));
    run.ledger.rank(r) = tallies[r];
    run.ledger.set_peak_memory_words(r, peaks[r]);
  }
  return run;
}

}  // namespace hpcnmf

#endif  // HPCNMF_CLUSTER_HPP
