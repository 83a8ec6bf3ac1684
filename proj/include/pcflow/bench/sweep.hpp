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

// dt x T x depth x solver x seed grids.
//
// Grid CSV columns:
//   solver,hidden_layers,dt,t_max,seed,status,test_acc,mean_wall_ms,mean_rhs_evals
// Summary CSV columns:
//   solver,hidden_layers,dt,t_max,n_ok,n_failed,mean_acc,sd_acc,selected
//
// The summary (and hence the selection) is computed from the grid table
// alone, so it can be recomputed offline from a saved grid.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pcflow/bench/csv.hpp"
#include "pcflow/bench/harness.hpp"
#include "pcflow/bench/stats.hpp"

namespace pcflow::bench {

struct SweepSpec {
  std::vector<double> dt_grid{0.5, 0.1, 0.05};
  std::vector<double> t_grid{5, 10, 20, 50, 100, 200, 500};
  std::vector<int> depths{3};
  std::vector<std::uint64_t> seeds{0};
  std::vector<SolverKind> solvers{SolverKind::kEuler, SolverKind::kHeun};
};

inline void check_spec(const SweepSpec& s) {
  if (s.dt_grid.empty() || s.t_grid.empty() || s.depths.empty() || s.seeds.empty() || s.solvers.empty())
    throw InvalidArgumentError("sweep: every grid must be non-empty");
  for (double dt : s.dt_grid)
    if (!(dt > 0)) throw InvalidArgumentError("sweep: dt values must be > 0");
  for (double t : s.t_grid)
    if (!(t > 0)) throw InvalidArgumentError("sweep: t values must be > 0");
  for (int d : s.depths)
    if (d < 0) throw InvalidArgumentError("sweep: depths must be >= 0");
}

struct SweepJob {
  SolverKind solver = SolverKind::kHeun;
  int hidden_layers = 0;
  double dt = 0.0;
  double t_max = 0.0;
  std::uint64_t seed = 0;
};

struct SweepRunResult {
  SweepJob job;
  bool ok = false;
  std::string error;
  double test_acc = 0.0;
  double mean_wall_ms = 0.0;
  double mean_rhs_evals = 0.0;
};

/// Grid order: solver, depth, dt, t_max, seed (outermost first).
inline std::vector<SweepJob> expand(const SweepSpec& s) {
  std::vector<SweepJob> jobs;
  for (auto solver : s.solvers)
    for (int depth : s.depths)
      for (double dt : s.dt_grid)
        for (double t : s.t_grid)
          for (auto seed : s.seeds) jobs.push_back({solver, depth, dt, t, seed});
  return jobs;
}

inline RunConfig job_config(const RunConfig& base, const SweepJob& job) {
  RunConfig cfg = base;
  cfg.solver.kind = job.solver;
  cfg.hidden_layers = job.hidden_layers;
  cfg.solver.dt0 = job.dt;
  cfg.solver.t_max = job.t_max;
  cfg.seed = job.seed;
  cfg.checkpoint_path.clear();
  return cfg;
}

inline std::string job_file_name(const SweepJob& j) {
  return to_string(j.solver) + "_H" + std::to_string(j.hidden_layers) + "_dt" + format_number(j.dt) + "_T" +
         format_number(j.t_max) + "_seed" + std::to_string(j.seed) + ".csv";
}

/// Runs every job on a pool of `workers` threads. Results come back in grid
/// order regardless of scheduling. A job that throws is recorded as failed.
/// With a non-empty `runs_dir`, each run's CSV is written there atomically.
template <typename Scalar>
std::vector<SweepRunResult> run_sweep(const RunConfig& base, const SweepSpec& spec, const DataSplit<Scalar>& data,
                                      unsigned workers = 1, const std::string& runs_dir = {},
                                      const std::function<void(const SweepRunResult&)>& on_done = {}) {
  check_spec(spec);
  const auto jobs = expand(spec);
  std::vector<SweepRunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex report;
  if (!runs_dir.empty()) std::filesystem::create_directories(runs_dir);

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      SweepRunResult r;
      r.job = jobs[i];
      try {
        const auto run = run_training<Scalar>(job_config(base, jobs[i]), data);
        const auto s = summarize(run);
        r.ok = true;
        r.test_acc = s.final_accuracy;
        r.mean_wall_ms = s.mean_wall_ms;
        r.mean_rhs_evals = s.mean_rhs_evals;
        if (!runs_dir.empty())
          write_csv_atomic((std::filesystem::path(runs_dir) / job_file_name(jobs[i])).string(), run_table(run));
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
      results[i] = r;
      if (on_done) {
        std::lock_guard lock(report);
        on_done(r);
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

namespace detail {

// Failure messages go into a single CSV field.
inline std::string sanitize_field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace detail

inline CsvTable grid_table(const RunConfig& base, const SweepSpec& spec, const std::vector<SweepRunResult>& results) {
  CsvTable t;
  t.metadata = run_metadata(base, "sweep");
  auto join = [](const auto& xs, auto fmt) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : " ") + fmt(x);
    return s;
  };
  t.metadata.emplace_back("dt_grid", join(spec.dt_grid, [](double v) { return format_number(v); }));
  t.metadata.emplace_back("t_grid", join(spec.t_grid, [](double v) { return format_number(v); }));
  t.metadata.emplace_back("depths", join(spec.depths, [](int v) { return std::to_string(v); }));
  t.metadata.emplace_back("seeds", join(spec.seeds, [](std::uint64_t v) { return std::to_string(v); }));
  t.metadata.emplace_back("solvers", join(spec.solvers, [](SolverKind k) { return to_string(k); }));
  t.columns = {"solver", "hidden_layers", "dt", "t_max", "seed", "status", "test_acc", "mean_wall_ms", "mean_rhs_evals"};
  for (const auto& r : results) {
    const auto& j = r.job;
    t.rows.push_back({to_string(j.solver), std::to_string(j.hidden_layers), format_number(j.dt),
                      format_number(j.t_max), std::to_string(j.seed),
                      r.ok ? "ok" : "failed: " + detail::sanitize_field(r.error), r.ok ? format_number(r.test_acc) : "",
                      r.ok ? format_number(r.mean_wall_ms) : "", r.ok ? format_number(r.mean_rhs_evals) : ""});
  }
  return t;
}

struct CellSummary {
  std::string solver;
  int hidden_layers = 0;
  double dt = 0.0;
  double t_max = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  double mean_acc = 0.0;
  double sd_acc = 0.0;
  bool selected = false;
};

/// Per-cell mean and sample sd of accuracy over successful seeds, in the
/// order cells first appear in the grid.
inline std::vector<CellSummary> summarize_grid(const CsvTable& grid) {
  const std::size_t c_solver = grid.column("solver"), c_depth = grid.column("hidden_layers"),
                    c_dt = grid.column("dt"), c_t = grid.column("t_max"), c_status = grid.column("status"),
                    c_acc = grid.column("test_acc");
  std::vector<CellSummary> cells;
  std::vector<std::vector<double>> accs;
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    const auto& row = grid.rows[i];
    const std::size_t line = data_line(grid, i);
    CellSummary key;
    key.solver = row[c_solver];
    key.hidden_layers = static_cast<int>(parse_number(row[c_depth], line));
    key.dt = parse_number(row[c_dt], line);
    key.t_max = parse_number(row[c_t], line);
    auto it = std::find_if(cells.begin(), cells.end(), [&](const CellSummary& c) {
      return c.solver == key.solver && c.hidden_layers == key.hidden_layers && c.dt == key.dt && c.t_max == key.t_max;
    });
    if (it == cells.end()) {
      cells.push_back(key);
      accs.emplace_back();
      it = cells.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - cells.begin());
    if (row[c_status] == "ok") {
      accs[k].push_back(parse_number(row[c_acc], line));
      ++cells[k].n_ok;
    } else {
      ++cells[k].n_failed;
    }
  }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    cells[k].mean_acc = mean(accs[k]);
    cells[k].sd_acc = sample_sd(accs[k]);
  }
  return cells;
}

/// Marks one cell per (solver, depth): among cells whose mean accuracy is
/// within one sd of the best cell's mean, the one with the smallest T. Ties
/// in T go to the higher mean, then to grid order. Cells with no successful
/// seed never qualify.
inline void select_cells(std::vector<CellSummary>& cells) {
  for (auto& c : cells) c.selected = false;
  for (std::size_t g = 0; g < cells.size(); ++g) {
    const auto& head = cells[g];
    bool seen = false;
    for (std::size_t h = 0; h < g; ++h)
      seen |= cells[h].solver == head.solver && cells[h].hidden_layers == head.hidden_layers;
    if (seen) continue;
    auto same_group = [&](const CellSummary& c) {
      return c.solver == head.solver && c.hidden_layers == head.hidden_layers && c.n_ok > 0;
    };
    const CellSummary* best = nullptr;
    for (const auto& c : cells)
      if (same_group(c) && (!best || c.mean_acc > best->mean_acc)) best = &c;
    if (!best) continue;
    const double threshold = best->mean_acc - best->sd_acc;
    CellSummary* pick = nullptr;
    for (auto& c : cells) {
      if (!same_group(c) || c.mean_acc < threshold) continue;
      if (!pick || c.t_max < pick->t_max || (c.t_max == pick->t_max && c.mean_acc > pick->mean_acc)) pick = &c;
    }
    pick->selected = true;
  }
}

inline CsvTable summary_table(const CsvTable& grid) {
  auto cells = summarize_grid(grid);
  select_cells(cells);
  CsvTable t;
  t.metadata = grid.metadata;
  t.metadata.emplace_back("selection", "max mean accuracy; within one sd of it the smallest t_max wins");
  t.columns = {"solver", "hidden_layers", "dt", "t_max", "n_ok", "n_failed", "mean_acc", "sd_acc", "selected"};
  for (const auto& c : cells)
    t.rows.push_back({c.solver, std::to_string(c.hidden_layers), format_number(c.dt), format_number(c.t_max),
                      std::to_string(c.n_ok), std::to_string(c.n_failed), format_number(c.mean_acc),
                      format_number(c.sd_acc), c.selected ? "1" : "0"});
  return t;
}

}  // namespace pcflow::bench
