// Copyright 2026 The pcflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcflow/bench/csv.hpp"
#include "pcflow/bench/harness.hpp"
#include "pcflow/bench/stats.hpp"
#include "pcflow/bench/svg.hpp"

namespace pcflow::bench {

/// Run CSVs with the same solver, depth, dt and t_max form one group; seeds
/// are averaged per step (steps >= 1 present in every run of the group).
inline std::string run_group_label(const CsvTable& t) {
  auto get = [&](const char* k) { return t.meta(k).value_or("?"); };
  return get("solver") + " H=" + get("hidden_layers") + " dt=" + get("dt") + " T=" + get("t_max");
}

enum class RunMetric { kWallMs, kRhsEvals };

inline LinePlot plot_runs(const std::vector<CsvTable>& tables, RunMetric metric) {
  if (tables.empty()) throw InvalidArgumentError("plot: no run tables");
  std::map<std::string, std::vector<RunOutput>> groups;
  std::vector<std::string> order;
  for (const auto& t : tables) {
    const auto label = run_group_label(t);
    if (!groups.count(label)) order.push_back(label);
    groups[label].push_back(parse_run_table(t));
  }
  LinePlot plot;
  plot.title = metric == RunMetric::kWallMs ? "Wall-clock time per training step" : "Gradient evaluations per step";
  plot.x_label = "training step";
  plot.y_label = metric == RunMetric::kWallMs ? "wall-clock (ms)" : "rhs evaluations";
  for (const auto& label : order) {
    const auto& runs = groups[label];
    std::size_t n_steps = SIZE_MAX;
    for (const auto& r : runs) n_steps = std::min(n_steps, r.steps.size());
    Series s;
    s.label = label + (runs.size() > 1 ? " (n=" + std::to_string(runs.size()) + ")" : "");
    for (std::size_t i = 1; i < n_steps; ++i) {
      std::vector<double> vals;
      for (const auto& r : runs)
        vals.push_back(metric == RunMetric::kWallMs ? r.steps[i].wall_ms : static_cast<double>(r.steps[i].rhs_evals));
      const double m = mean(vals), sd = sample_sd(vals);
      s.xs.push_back(static_cast<double>(runs.front().steps[i].step));
      s.ys.push_back(m);
      s.lower.push_back(m - sd);
      s.upper.push_back(m + sd);
    }
    plot.series.push_back(std::move(s));
  }
  return plot;
}

/// Numerical (solid) and closed-form (dashed) equilibrium energy per step,
/// one pair of lines per t_max.
inline LinePlot plot_theory_energies(const CsvTable& table) {
  const auto th = parse_theory_table(table);
  if (th.rows.empty()) throw InvalidArgumentError("plot: theory table has no step rows");
  LinePlot plot;
  plot.title = "Equilibrium energy: closed form vs inference";
  plot.x_label = "training step";
  plot.y_label = "energy";
  std::vector<double> ts;
  for (const auto& r : th.rows)
    if (std::find(ts.begin(), ts.end(), r.t_max) == ts.end()) ts.push_back(r.t_max);
  for (double t : ts) {
    Series num, theory;
    num.label = "numerical T=" + format_number(t);
    theory.label = "theory T=" + format_number(t);
    theory.dashed = true;
    for (const auto& r : th.rows) {
      if (r.t_max != t) continue;
      num.xs.push_back(static_cast<double>(r.step));
      num.ys.push_back(r.numerical_energy);
      theory.xs.push_back(static_cast<double>(r.step));
      theory.ys.push_back(r.theory_energy);
    }
    plot.series.push_back(std::move(num));
    plot.series.push_back(std::move(theory));
  }
  return plot;
}

inline LinePlot plot_theory_accuracy(const CsvTable& table) {
  const auto summary = summarize_theory(parse_theory_table(table));
  if (summary.empty()) throw InvalidArgumentError("plot: theory table has no step rows");
  LinePlot plot;
  plot.title = "Test accuracy vs integration limit";
  plot.x_label = "T";
  plot.y_label = "test accuracy";
  plot.log_x = true;
  Series s;
  s.label = "final accuracy";
  for (const auto& r : summary) {
    s.xs.push_back(r.t_max);
    s.ys.push_back(r.final_test_acc);
  }
  plot.series.push_back(std::move(s));
  return plot;
}

}  // namespace pcflow::bench
