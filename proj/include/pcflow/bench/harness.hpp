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

// Training-run and theory-run harnesses behind the bench CLI.
//
// Run CSV columns: step,wall_ms,energy,rhs_evals,accepted,rejected,test_acc
//   Step rows fill every column but test_acc. Accuracy rows carry only step
//   (index of the last completed training step) and test_acc.
//
// Theory CSV columns:
//   t_max,step,wall_ms,theory_energy,numerical_energy,gap,rhs_evals,test_acc
//   with accuracy rows again holding only t_max, step and test_acc.
//
// Steps are numbered from 0. Step 0 is timed and written but left out of
// every aggregate, since it runs with cold caches.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcflow/bench/csv.hpp"
#include "pcflow/bench/stats.hpp"
#include "pcflow/checkpoint.hpp"
#include "pcflow/dataio.hpp"
#include "pcflow/theory.hpp"
#include "pcflow/trainer.hpp"

#ifndef PCFLOW_GIT_DESCRIBE
#define PCFLOW_GIT_DESCRIBE "unknown"
#endif

namespace pcflow::bench {

inline constexpr const char* kRunColumns[] = {"step",     "wall_ms",  "energy",  "rhs_evals",
                                              "accepted", "rejected", "test_acc"};
inline constexpr const char* kTheoryColumns[] = {"t_max",     "step", "wall_ms", "theory_energy", "numerical_energy",
                                                 "gap",       "rhs_evals", "test_acc"};

// Fixed seeds for the synthetic dataset, so runs that differ only in --seed
// see the same data.
inline constexpr std::uint64_t kSyntheticTrainSeed = 101;
inline constexpr std::uint64_t kSyntheticTestSeed = 202;

struct RunConfig {
  std::string dataset = "mnist";  // mnist, fashion or synthetic
  std::string data_dir;           // empty: PCFLOW_DATA_DIR, then data/<dataset>
  int hidden_layers = 3;
  Eigen::Index width = 300;
  Activation activation = Activation::tanh();
  Activation output_activation = Activation::identity();
  bool learn_bias = true;
  SolverConfig solver;
  std::string optimizer = "adam";  // adam or sgd
  double lr = 1e-3;
  Eigen::Index batch_size = 64;
  int epochs = 1;
  std::uint64_t seed = 0;
  bool record_energies = false;
  bool float32 = false;
  Eigen::Index train_limit = 5000;
  Eigen::Index test_limit = 1000;
  Eigen::Index synthetic_dim = 20;
  int eval_every = 0;  // steps between accuracy rows; 0 = end of each epoch
  std::string checkpoint_path;
};

struct StepRecord {
  std::size_t step = 0;
  double wall_ms = 0.0;
  double energy = 0.0;
  std::size_t rhs_evals = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

struct AccuracyRecord {
  std::size_t step = 0;
  double test_acc = 0.0;
};

struct EnergyTraceRow {
  std::size_t step = 0;
  double t = 0.0;
  double energy = 0.0;
};

struct RunOutput {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<StepRecord> steps;
  std::vector<AccuracyRecord> accuracies;
  std::vector<EnergyTraceRow> energy_trace;  // only with record_energies

  double final_accuracy() const { return accuracies.empty() ? 0.0 : accuracies.back().test_acc; }
};

/// Resolves the data directory: explicit value, then $PCFLOW_DATA_DIR, then
/// data/<dataset>.
inline std::string resolve_data_dir(const std::string& explicit_dir, const std::string& dataset) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("PCFLOW_DATA_DIR"); env && *env) return env;
  return "data/" + dataset;
}

template <typename Scalar>
struct DataSplit {
  Dataset<Scalar> train;
  Dataset<Scalar> test;
};

template <typename Scalar>
DataSplit<Scalar> load_data(const RunConfig& cfg) {
  if (cfg.train_limit < 1 || cfg.test_limit < 1) throw InvalidArgumentError("train/test limits must be >= 1");
  if (cfg.dataset == "synthetic") {
    return {synthetic_classification<Scalar>(cfg.train_limit, cfg.synthetic_dim, 10, RngSeed{kSyntheticTrainSeed}),
            synthetic_classification<Scalar>(cfg.test_limit, cfg.synthetic_dim, 10, RngSeed{kSyntheticTestSeed})};
  }
  if (cfg.dataset != "mnist" && cfg.dataset != "fashion")
    throw InvalidArgumentError("unknown dataset '" + cfg.dataset + "'");
  const std::filesystem::path dir = resolve_data_dir(cfg.data_dir, cfg.dataset);
  auto file = [&](const char* name) {
    const auto p = dir / name;
    if (!std::filesystem::exists(p)) throw IdxIoError("missing data file '" + p.string() + "'");
    return p.string();
  };
  auto train = load_idx<Scalar>(file("train-images-idx3-ubyte"), file("train-labels-idx1-ubyte"));
  auto test = load_idx<Scalar>(file("t10k-images-idx3-ubyte"), file("t10k-labels-idx1-ubyte"));
  return {train.head(cfg.train_limit), test.head(cfg.test_limit)};
}

inline std::vector<Eigen::Index> layer_dims(const RunConfig& cfg, Eigen::Index input_dim, int classes) {
  if (cfg.hidden_layers < 0) throw InvalidArgumentError("hidden_layers must be >= 0");
  std::vector<Eigen::Index> dims{input_dim};
  for (int i = 0; i < cfg.hidden_layers; ++i) dims.push_back(cfg.width);
  dims.push_back(classes);
  return dims;
}

template <typename Scalar>
Network<Scalar> build_network(const RunConfig& cfg, Eigen::Index input_dim, int classes) {
  auto net = init_network<Scalar>(layer_dims(cfg, input_dim, classes), cfg.activation, RngSeed{cfg.seed},
                                  cfg.output_activation);
  for (auto& layer : net.layers) layer.learn_bias = cfg.learn_bias;
  return net;
}

template <typename Scalar>
OptimState<Scalar> build_optimizer(const RunConfig& cfg, const Network<Scalar>& net) {
  if (cfg.optimizer == "adam") return make_adam(net, AdamConfig{cfg.lr});
  if (cfg.optimizer == "sgd") return make_sgd<Scalar>(cfg.lr);
  throw InvalidArgumentError("unknown optimizer '" + cfg.optimizer + "'");
}

/// Batch order for an epoch; a pure function of the run seed and epoch.
inline RngSeed epoch_seed(std::uint64_t seed, int epoch) {
  return RngSeed{seed * 1000003ull + static_cast<std::uint64_t>(epoch) + 1};
}

/// Everything needed to re-run: all hyperparameters plus build and data facts.
inline std::vector<std::pair<std::string, std::string>> run_metadata(const RunConfig& cfg, const char* kind) {
  const auto& s = cfg.solver;
  return {
      {"kind", kind},
      {"pcflow_version", PCFLOW_GIT_DESCRIBE},
      {"dataset", cfg.dataset},
      {"data_dir", cfg.dataset == "synthetic" ? "" : resolve_data_dir(cfg.data_dir, cfg.dataset)},
      {"train_limit", std::to_string(cfg.train_limit)},
      {"test_limit", std::to_string(cfg.test_limit)},
      {"synthetic_dim", std::to_string(cfg.synthetic_dim)},
      {"normalization", cfg.dataset == "synthetic" ? "none" : "pixels/255"},
      {"hidden_layers", std::to_string(cfg.hidden_layers)},
      {"width", std::to_string(cfg.width)},
      {"activation", to_string(cfg.activation)},
      {"output_activation", to_string(cfg.output_activation)},
      {"learn_bias", cfg.learn_bias ? "1" : "0"},
      {"init", "uniform(+-1/sqrt(fan_in)),zero_bias"},
      {"solver", to_string(s.kind)},
      {"adaptive", s.adaptive ? "1" : "0"},
      {"dt", format_number(s.dt0)},
      {"t_max", format_number(s.t_max)},
      {"rtol", format_number(s.rtol)},
      {"atol", format_number(s.atol)},
      {"max_steps", std::to_string(s.max_steps)},
      {"optimizer", cfg.optimizer},
      {"lr", format_number(cfg.lr)},
      {"batch_size", std::to_string(cfg.batch_size)},
      {"epochs", std::to_string(cfg.epochs)},
      {"seed", std::to_string(cfg.seed)},
      {"eval_every", std::to_string(cfg.eval_every)},
      {"precision", cfg.float32 ? "float32" : "float64"},
      {"record_energies", cfg.record_energies ? "1" : "0"},
      {"step0", "timed, excluded from aggregates"},
  };
}

/// Trains one run. `on_step` (optional) sees every step record as it lands.
template <typename Scalar>
RunOutput run_training(const RunConfig& cfg, const DataSplit<Scalar>& data,
                       const std::function<void(const StepRecord&)>& on_step = {}) {
  if (cfg.epochs < 1) throw InvalidArgumentError("epochs must be >= 1");
  if (cfg.eval_every < 0) throw InvalidArgumentError("eval_every must be >= 0");
  RunOutput out;
  out.metadata = run_metadata(cfg, "run");

  auto net = build_network<Scalar>(cfg, data.train.dim(), data.train.num_classes);
  auto optim = build_optimizer(cfg, net);
  StepOptions options;
  options.solver = cfg.solver;
  options.record.energies = cfg.record_energies;

  std::size_t step = 0;
  auto evaluate = [&](std::size_t last_step) {
    out.accuracies.push_back({last_step, test_discriminative_pc(net, data.test.inputs, data.test.labels)});
  };
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto plan = batches(data.train, BatchPlan{cfg.batch_size, epoch_seed(cfg.seed, epoch), true});
    if (plan.empty()) throw InvalidArgumentError("training set smaller than one batch");
    for (const auto& batch : plan) {
      const auto t0 = std::chrono::steady_clock::now();
      auto result = make_pc_step(net, optim, batch.y, std::optional<Matrix<Scalar>>(batch.x), options);
      const auto t1 = std::chrono::steady_clock::now();
      StepRecord rec;
      rec.step = step;
      rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      rec.energy = result.energies.total;
      rec.rhs_evals = result.solve_stats.rhs_evaluations;
      rec.accepted = result.solve_stats.accepted_steps;
      rec.rejected = result.solve_stats.rejected_steps;
      out.steps.push_back(rec);
      if (on_step) on_step(rec);
      for (std::size_t i = 0; i < result.trajectory.times.size(); ++i)
        out.energy_trace.push_back({step, result.trajectory.times[i], result.trajectory.energies[i]});
      net = std::move(result.network);
      optim = std::move(result.optim_state);
      if (cfg.eval_every > 0 && (step + 1) % static_cast<std::size_t>(cfg.eval_every) == 0) evaluate(step);
      ++step;
    }
    if (cfg.eval_every == 0) evaluate(step - 1);
  }
  if (out.accuracies.empty() || out.accuracies.back().step != step - 1) evaluate(step - 1);
  if (!cfg.checkpoint_path.empty()) save_network(net, cfg.checkpoint_path);
  return out;
}

/// Loads data in the configured precision and trains.
inline RunOutput run_training(const RunConfig& cfg, const std::function<void(const StepRecord&)>& on_step = {}) {
  if (cfg.float32) return run_training<float>(cfg, load_data<float>(cfg), on_step);
  return run_training<double>(cfg, load_data<double>(cfg), on_step);
}

inline CsvTable run_table(const RunOutput& run) {
  CsvTable t;
  t.metadata = run.metadata;
  t.columns.assign(std::begin(kRunColumns), std::end(kRunColumns));
  for (const auto& r : run.steps)
    t.rows.push_back({std::to_string(r.step), format_number(r.wall_ms), format_number(r.energy),
                      std::to_string(r.rhs_evals), std::to_string(r.accepted), std::to_string(r.rejected), ""});
  for (const auto& a : run.accuracies)
    t.rows.push_back({std::to_string(a.step), "", "", "", "", "", format_number(a.test_acc)});
  return t;
}

inline CsvTable energy_trace_table(const RunOutput& run) {
  CsvTable t;
  t.metadata = run.metadata;
  t.columns = {"step", "t", "energy"};
  for (const auto& r : run.energy_trace)
    t.rows.push_back({std::to_string(r.step), format_number(r.t), format_number(r.energy)});
  return t;
}

/// Inverse of run_table (metadata, step rows, accuracy rows).
inline RunOutput parse_run_table(const CsvTable& t) {
  RunOutput out;
  out.metadata = t.metadata;
  const std::size_t c_step = t.column("step"), c_wall = t.column("wall_ms"), c_energy = t.column("energy"),
                    c_rhs = t.column("rhs_evals"), c_acc = t.column("accepted"), c_rej = t.column("rejected"),
                    c_test = t.column("test_acc");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = data_line(t, i);
    const auto step = static_cast<std::size_t>(parse_number(row[c_step], line));
    if (!row[c_test].empty()) {
      out.accuracies.push_back({step, parse_number(row[c_test], line)});
      continue;
    }
    StepRecord r;
    r.step = step;
    r.wall_ms = parse_number(row[c_wall], line);
    r.energy = parse_number(row[c_energy], line);
    r.rhs_evals = static_cast<std::size_t>(parse_number(row[c_rhs], line));
    r.accepted = static_cast<std::size_t>(parse_number(row[c_acc], line));
    r.rejected = static_cast<std::size_t>(parse_number(row[c_rej], line));
    out.steps.push_back(r);
  }
  return out;
}

struct RunSummary {
  std::size_t steps = 0;  // aggregated steps (step 0 excluded)
  double mean_wall_ms = 0.0;
  double sd_wall_ms = 0.0;
  double mean_rhs_evals = 0.0;
  double mean_energy = 0.0;
  double final_accuracy = 0.0;
};

inline RunSummary summarize(const RunOutput& run) {
  std::vector<double> wall, rhs, energy;
  for (const auto& r : run.steps) {
    if (r.step == 0) continue;
    wall.push_back(r.wall_ms);
    rhs.push_back(static_cast<double>(r.rhs_evals));
    energy.push_back(r.energy);
  }
  return {wall.size(), mean(wall), sample_sd(wall), mean(rhs), mean(energy), run.final_accuracy()};
}

// --- theory runs ----------------------------------------------------------

struct TheoryConfig {
  RunConfig base;  // activations and biases are overridden
  std::vector<double> t_grid{5, 10, 20, 50, 100, 200};
};

struct TheoryRow {
  double t_max = 0.0;
  std::size_t step = 0;
  double wall_ms = 0.0;
  double theory_energy = 0.0;
  double numerical_energy = 0.0;
  std::size_t rhs_evals = 0;
  double gap() const { return numerical_energy - theory_energy; }
};

struct TheoryAccuracy {
  double t_max = 0.0;
  std::size_t step = 0;
  double test_acc = 0.0;
};

struct TheoryOutput {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<TheoryRow> rows;
  std::vector<TheoryAccuracy> accuracies;
};

/// Linear network with zero, frozen biases: the setting where the closed-form
/// equilibrium energy applies.
inline RunConfig linearized(RunConfig cfg) {
  cfg.activation = Activation::identity();
  cfg.output_activation = Activation::identity();
  cfg.learn_bias = false;
  cfg.float32 = false;
  return cfg;
}

/// One training run per t_max, all from the same initial network and batch
/// order. Each step records F* before inference and the energy inference
/// reached.
inline TheoryOutput run_theory(const TheoryConfig& tc, const DataSplit<double>& data) {
  if (tc.t_grid.empty()) throw InvalidArgumentError("theory: empty t grid");
  const RunConfig cfg = linearized(tc.base);
  if (cfg.epochs < 1) throw InvalidArgumentError("epochs must be >= 1");
  TheoryOutput out;
  out.metadata = run_metadata(cfg, "theory");
  std::string grid;
  for (double t : tc.t_grid) grid += (grid.empty() ? "" : " ") + format_number(t);
  out.metadata.emplace_back("t_grid", grid);

  for (double t_max : tc.t_grid) {
    RunConfig run_cfg = cfg;
    run_cfg.solver.t_max = t_max;
    auto net = build_network<double>(run_cfg, data.train.dim(), data.train.num_classes);
    auto optim = build_optimizer(run_cfg, net);
    StepOptions options;
    options.solver = run_cfg.solver;
    std::size_t step = 0;
    auto evaluate = [&](std::size_t last) {
      out.accuracies.push_back({t_max, last, test_discriminative_pc(net, data.test.inputs, data.test.labels)});
    };
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const auto plan = batches(data.train, BatchPlan{cfg.batch_size, epoch_seed(cfg.seed, epoch), true});
      if (plan.empty()) throw InvalidArgumentError("training set smaller than one batch");
      for (const auto& batch : plan) {
        TheoryRow row;
        row.t_max = t_max;
        row.step = step;
        row.theory_energy = linear_equilibrium_energy(net, batch.x, batch.y);
        const auto t0 = std::chrono::steady_clock::now();
        auto result = make_pc_step(net, optim, batch.y, std::optional<Matrix<double>>(batch.x), options);
        const auto t1 = std::chrono::steady_clock::now();
        row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        row.numerical_energy = result.energies.total;
        row.rhs_evals = result.solve_stats.rhs_evaluations;
        out.rows.push_back(row);
        net = std::move(result.network);
        optim = std::move(result.optim_state);
        if (cfg.eval_every > 0 && (step + 1) % static_cast<std::size_t>(cfg.eval_every) == 0) evaluate(step);
        ++step;
      }
      if (cfg.eval_every == 0) evaluate(step - 1);
    }
    if (out.accuracies.empty() || out.accuracies.back().t_max != t_max || out.accuracies.back().step != step - 1)
      evaluate(step - 1);
  }
  return out;
}

inline CsvTable theory_table(const TheoryOutput& th) {
  CsvTable t;
  t.metadata = th.metadata;
  t.columns.assign(std::begin(kTheoryColumns), std::end(kTheoryColumns));
  for (const auto& r : th.rows)
    t.rows.push_back({format_number(r.t_max), std::to_string(r.step), format_number(r.wall_ms),
                      format_number(r.theory_energy, 17), format_number(r.numerical_energy, 17),
                      format_number(r.gap(), 17), std::to_string(r.rhs_evals), ""});
  for (const auto& a : th.accuracies)
    t.rows.push_back({format_number(a.t_max), std::to_string(a.step), "", "", "", "", "", format_number(a.test_acc)});
  return t;
}

inline TheoryOutput parse_theory_table(const CsvTable& t) {
  TheoryOutput out;
  out.metadata = t.metadata;
  const std::size_t c_t = t.column("t_max"), c_step = t.column("step"), c_wall = t.column("wall_ms"),
                    c_th = t.column("theory_energy"), c_num = t.column("numerical_energy"),
                    c_rhs = t.column("rhs_evals"), c_acc = t.column("test_acc");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = data_line(t, i);
    const double t_max = parse_number(row[c_t], line);
    const auto step = static_cast<std::size_t>(parse_number(row[c_step], line));
    if (!row[c_acc].empty()) {
      out.accuracies.push_back({t_max, step, parse_number(row[c_acc], line)});
      continue;
    }
    TheoryRow r;
    r.t_max = t_max;
    r.step = step;
    r.wall_ms = parse_number(row[c_wall], line);
    r.theory_energy = parse_number(row[c_th], line);
    r.numerical_energy = parse_number(row[c_num], line);
    r.rhs_evals = static_cast<std::size_t>(parse_number(row[c_rhs], line));
    out.rows.push_back(r);
  }
  return out;
}

struct TheorySummaryRow {
  double t_max = 0.0;
  double mean_gap = 0.0;
  double mean_theory_energy = 0.0;
  double mean_numerical_energy = 0.0;
  double final_test_acc = 0.0;
};

/// Per-t_max means over steps >= 1, in grid order, plus the last accuracy.
inline std::vector<TheorySummaryRow> summarize_theory(const TheoryOutput& th) {
  std::vector<TheorySummaryRow> out;
  auto find = [&](double t) -> TheorySummaryRow* {
    for (auto& s : out)
      if (s.t_max == t) return &s;
    return nullptr;
  };
  std::vector<std::vector<double>> gaps, theory, numerical;
  for (const auto& r : th.rows) {
    if (!find(r.t_max)) {
      out.push_back({r.t_max});
      gaps.emplace_back();
      theory.emplace_back();
      numerical.emplace_back();
    }
    if (r.step == 0) continue;
    const auto k = static_cast<std::size_t>(find(r.t_max) - out.data());
    gaps[k].push_back(r.gap());
    theory[k].push_back(r.theory_energy);
    numerical[k].push_back(r.numerical_energy);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].mean_gap = mean(gaps[k]);
    out[k].mean_theory_energy = mean(theory[k]);
    out[k].mean_numerical_energy = mean(numerical[k]);
  }
  for (const auto& a : th.accuracies)
    if (auto* s = find(a.t_max)) s->final_test_acc = a.test_acc;
  return out;
}

inline CsvTable theory_summary_table(const TheoryOutput& th) {
  CsvTable t;
  t.metadata = th.metadata;
  t.columns = {"t_max", "mean_gap", "mean_theory_energy", "mean_numerical_energy", "final_test_acc"};
  for (const auto& s : summarize_theory(th))
    t.rows.push_back({format_number(s.t_max), format_number(s.mean_gap, 17), format_number(s.mean_theory_energy, 17),
                      format_number(s.mean_numerical_energy, 17), format_number(s.final_test_acc)});
  return t;
}

}  // namespace pcflow::bench
