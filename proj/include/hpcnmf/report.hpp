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
 * @file    report.hpp
 * @brief   Benchmark reports: JSON and CSV emission, and run comparison.
 *
 * Category rows are per iteration and hold the maximum over ranks of that
 * iteration's tallies (the critical-path view); the totals row is the sum of
 * those rows over iterations. One-time setup traffic (the ‖A‖² reduction) is
 * not part of any iteration and so not part of the totals.
 */

#ifndef HPCNMF_REPORT_HPP
#define HPCNMF_REPORT_HPP

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpcnmf/cluster.hpp"
#include "hpcnmf/common.hpp"
#include "hpcnmf/cost_model.hpp"
#include "hpcnmf/nmf.hpp"

namespace hpcnmf {

inline constexpr int kReportSchema = 1;

struct BenchReport {
  nlohmann::json config;  // echo of the options that produced the run
  std::string algorithm;
  std::string solver;
  std::size_t m = 0, n = 0, k = 0, p = 1;
  GridShape grid;
  bool predict_only = false;
  ModelParams model;
  std::vector<IterationStats> iterations;
  CostEstimate prediction;
  LowerBound lower_bound;
  double peak_memory_words = 0;  // max over ranks

  CategoryTallies totals() const {
    CategoryTallies t{};
    for (const auto& it : iterations)
      for (std::size_t c = 0; c < kCategoryCount; ++c) t[c] += it.delta[c];
    return t;
  }
  /// Modeled α-β-γ time of each category total.
  std::array<double, kCategoryCount> modeled_totals() const {
    std::array<double, kCategoryCount> out{};
    const auto t = totals();
    for (std::size_t c = 0; c < kCategoryCount; ++c) out[c] = modeled_time(t[c], model);
    return out;
  }
  /// Predicted per-iteration words over the lower bound; 0 when the bound is 0.
  double optimality_ratio() const { return lower_bound.words > 0 ? prediction.words / lower_bound.words : 0.0; }
  /// Per-iteration collective words actually measured (AllGather, ReduceScatter, AllReduce).
  double measured_words_per_iteration() const {
    if (iterations.empty()) return 0.0;
    const auto t = totals();
    double w = 0;
    for (auto c : kAllCategories)
      if (is_communication(c)) w += t[static_cast<std::size_t>(c)].words;
    return w / static_cast<double>(iterations.size());
  }
  double measured_messages_per_iteration() const {
    if (iterations.empty()) return 0.0;
    const auto t = totals();
    double w = 0;
    for (auto c : kAllCategories)
      if (is_communication(c)) w += t[static_cast<std::size_t>(c)].messages;
    return w / static_cast<double>(iterations.size());
  }
  double wall_seconds() const {
    double s = 0;
    for (const auto& t : totals()) s += t.wall_seconds;
    return s;
  }
};

namespace detail {

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline double number_or_nan(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

inline nlohmann::json tally_json(const Tally& t, double modeled) {
  return {{"wall_s", t.wall_seconds}, {"words", t.words},         {"messages", t.messages},
          {"flops", t.flops},         {"modeled_time", modeled}};
}

inline Tally tally_from_json(const nlohmann::json& j) {
  Tally t;
  t.wall_seconds = j.at("wall_s").get<double>();
  t.words = j.at("words").get<double>();
  t.messages = j.at("messages").get<double>();
  t.flops = j.at("flops").get<double>();
  return t;
}

inline nlohmann::json estimate_json(const CostEstimate& e) {
  return {{"flops", e.flops},
          {"words", e.words},
          {"messages", e.messages},
          {"memory_words", e.memory_words},
          {"nls_term", e.nls_term}};
}

inline bool is_power_of_two(std::size_t v) { return v && !(v & (v - 1)); }

}  // namespace detail

inline nlohmann::json report_to_json(const BenchReport& r) {
  using nlohmann::json;
  json j;
  j["schema"] = kReportSchema;
  j["config"] = r.config;
  j["algorithm"] = r.algorithm;
  j["solver"] = r.solver;
  j["m"] = r.m;
  j["n"] = r.n;
  j["k"] = r.k;
  j["p"] = r.p;
  j["grid"] = {r.grid.rows, r.grid.cols};
  j["predict_only"] = r.predict_only;
  j["model"] = {{"alpha", r.model.alpha}, {"beta", r.model.beta}, {"gamma", r.model.gamma}};
  json iters = json::array();
  for (const auto& it : r.iterations) {
    json cats = json::object();
    for (auto c : kAllCategories) {
      const auto& t = it.delta[static_cast<std::size_t>(c)];
      cats[to_string(c)] = detail::tally_json(t, modeled_time(t, r.model));
    }
    iters.push_back({{"iter", it.iteration},
                     {"residual", detail::number_or_null(it.residual)},
                     {"relative_residual", detail::number_or_null(it.relative_residual)},
                     {"categories", cats}});
  }
  j["iterations"] = iters;
  json totals = json::object();
  const auto t = r.totals();
  const auto modeled = r.modeled_totals();
  for (auto c : kAllCategories) {
    const auto i = static_cast<std::size_t>(c);
    totals[to_string(c)] = detail::tally_json(t[i], modeled[i]);
  }
  j["totals"] = totals;
  j["prediction"] = detail::estimate_json(r.prediction);
  j["lower_bound"] = {{"words", r.lower_bound.words}, {"assumption_violated", r.lower_bound.assumption_violated}};
  j["optimality_ratio"] = r.optimality_ratio();
  j["peak_memory_words"] = r.peak_memory_words;
  return j;
}

inline BenchReport report_from_json(const nlohmann::json& j) {
  if (j.value("schema", 0) != kReportSchema) throw ConfigError("unsupported report schema");
  BenchReport r;
  r.config = j.value("config", nlohmann::json::object());
  r.algorithm = j.at("algorithm").get<std::string>();
  r.solver = j.at("solver").get<std::string>();
  r.m = j.at("m").get<std::size_t>();
  r.n = j.at("n").get<std::size_t>();
  r.k = j.at("k").get<std::size_t>();
  r.p = j.at("p").get<std::size_t>();
  r.grid = GridShape(j.at("grid")[0].get<std::size_t>(), j.at("grid")[1].get<std::size_t>());
  r.predict_only = j.value("predict_only", false);
  r.model = {j.at("model").at("alpha").get<double>(), j.at("model").at("beta").get<double>(),
             j.at("model").at("gamma").get<double>()};
  for (const auto& it : j.at("iterations")) {
    IterationStats s;
    s.iteration = it.at("iter").get<std::size_t>();
    s.residual = detail::number_or_nan(it.at("residual"));
    s.relative_residual = detail::number_or_nan(it.at("relative_residual"));
    for (auto c : kAllCategories)
      s.delta[static_cast<std::size_t>(c)] = detail::tally_from_json(it.at("categories").at(to_string(c)));
    r.iterations.push_back(s);
  }
  const auto& pe = j.at("prediction");
  r.prediction = {pe.at("flops").get<double>(), pe.at("words").get<double>(), pe.at("messages").get<double>(),
                  pe.at("memory_words").get<double>(), pe.at("nls_term").get<std::string>()};
  r.lower_bound = {j.at("lower_bound").at("words").get<double>(),
                   j.at("lower_bound").at("assumption_violated").get<bool>()};
  r.peak_memory_words = j.at("peak_memory_words").get<double>();
  return r;
}

inline void write_json(const BenchReport& r, std::ostream& out) { out << report_to_json(r).dump(2) << '\n'; }

inline BenchReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return report_from_json(j);
}

inline constexpr const char* kCsvHeader = "iter,category,wall_s,words,messages,flops,modeled_time";

/// One row per (iteration, category), then a "total" row per category; a run
/// with no iterations yields the header alone.
inline void write_csv(const BenchReport& r, std::ostream& out) {
  out << kCsvHeader << '\n';
  auto row = [&](const std::string& iter, Category c, const Tally& t) {
    out << iter << ',' << to_string(c) << ',' << detail::g17(t.wall_seconds) << ',' << detail::g17(t.words) << ','
        << detail::g17(t.messages) << ',' << detail::g17(t.flops) << ',' << detail::g17(modeled_time(t, r.model))
        << '\n';
  };
  for (const auto& it : r.iterations)
    for (auto c : kAllCategories) row(std::to_string(it.iteration), c, it.delta[static_cast<std::size_t>(c)]);
  if (r.iterations.empty()) return;
  const auto t = r.totals();
  for (auto c : kAllCategories) row("total", c, t[static_cast<std::size_t>(c)]);
}

/// Fixed-width per-category summary for the terminal.
inline void print_summary(const BenchReport& r, std::ostream& out) {
  char line[160];
  out << r.algorithm << " / " << r.solver << "  m=" << r.m << " n=" << r.n << " k=" << r.k << " p=" << r.p
      << " grid=" << r.grid.str() << "  iterations=" << r.iterations.size() << '\n';
  if (!r.iterations.empty() && std::isfinite(r.iterations.back().relative_residual)) {
    std::snprintf(line, sizeof line, "final relative residual %.6e\n", r.iterations.back().relative_residual);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-14s %12s %14s %10s %14s %12s\n", "category", "wall_s", "words", "messages",
                "flops", "modeled_s");
  out << line;
  const auto t = r.totals();
  for (auto c : kAllCategories) {
    const auto& x = t[static_cast<std::size_t>(c)];
    std::snprintf(line, sizeof line, "%-14s %12.4e %14.6g %10.6g %14.6g %12.4e\n", to_string(c), x.wall_seconds,
                  x.words, x.messages, x.flops, modeled_time(x, r.model));
    out << line;
  }
  std::snprintf(line, sizeof line, "predicted/iter: words %.6g messages %.6g flops %.6g (+ %s)\n", r.prediction.words,
                r.prediction.messages, r.prediction.flops, r.prediction.nls_term.c_str());
  out << line;
  std::snprintf(line, sizeof line, "lower bound words %.6g%s  optimality ratio %.4g\n", r.lower_bound.words,
                r.lower_bound.assumption_violated ? " (assumption violated)" : "", r.optimality_ratio());
  out << line;
}

struct RunComparison {
  std::array<double, kCategoryCount> wall_ratio{};  // A / B per category
  std::array<double, kCategoryCount> word_ratio{};  // A / B per category, NaN when B has none
  double total_word_ratio = 0;                      // A / B over communication categories
  double speedup = 0;                               // wall(A) / wall(B)
  bool a_mismatch = false;  // measured words/iteration differ from the prediction (power-of-two grid)
  bool b_mismatch = false;
};

namespace detail {

inline double ratio(double a, double b) {
  if (a == b) return 1.0;
  return b != 0 ? a / b : std::numeric_limits<double>::quiet_NaN();
}

inline bool prediction_mismatch(const BenchReport& r) {
  if (r.predict_only || r.iterations.empty()) return false;
  if (!is_power_of_two(r.grid.rows) || !is_power_of_two(r.grid.cols)) return false;
  return r.measured_words_per_iteration() != r.prediction.words;
}

}  // namespace detail

inline RunComparison compare_runs(const BenchReport& a, const BenchReport& b) {
  if (a.m != b.m || a.n != b.n || a.k != b.k)
    throw ConfigError("reports are not comparable: (m, n, k) = (" + std::to_string(a.m) + ", " + std::to_string(a.n) +
                      ", " + std::to_string(a.k) + ") vs (" + std::to_string(b.m) + ", " + std::to_string(b.n) +
                      ", " + std::to_string(b.k) + ")");
  RunComparison c;
  const auto ta = a.totals();
  const auto tb = b.totals();
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    c.wall_ratio[i] = detail::ratio(ta[i].wall_seconds, tb[i].wall_seconds);
    c.word_ratio[i] = detail::ratio(ta[i].words, tb[i].words);
  }
  c.total_word_ratio = detail::ratio(a.measured_words_per_iteration(), b.measured_words_per_iteration());
  c.speedup = detail::ratio(a.wall_seconds(), b.wall_seconds());
  c.a_mismatch = detail::prediction_mismatch(a);
  c.b_mismatch = detail::prediction_mismatch(b);
  return c;
}

inline void print_comparison(const RunComparison& c, const BenchReport& a, const BenchReport& b, std::ostream& out) {
  char line[160];
  out << "A: " << a.algorithm << " " << a.grid.str() << "   B: " << b.algorithm << " " << b.grid.str() << '\n';
  std::snprintf(line, sizeof line, "%-14s %14s %14s\n", "category", "wall A/B", "words A/B");
  out << line;
  for (auto cat : kAllCategories) {
    const auto i = static_cast<std::size_t>(cat);
    std::snprintf(line, sizeof line, "%-14s %14.6g %14.6g\n", to_string(cat), c.wall_ratio[i], c.word_ratio[i]);
    out << line;
  }
  std::snprintf(line, sizeof line, "total word ratio %.6g  speedup %.6g\n", c.total_word_ratio, c.speedup);
  out << line;
  if (c.a_mismatch) out << "A: measured words differ from prediction\n";
  if (c.b_mismatch) out << "B: measured words differ from prediction\n";
}

}  // namespace hpcnmf

#endif  // HPCNMF_REPORT_HPP
