#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saacm/controller.hpp"
#include "saacm/testbed.hpp"

namespace saacm::harness {

// Outcome of a single seeded run, as used by SP1 / speedup.
struct RunSummary {
  std::uint64_t seed = 0;
  bool success = false;
  long evaluations = 0;
  double best_gap = 0.0;  // best f - f_opt
};

// Success performance: mean evaluations of successful runs divided by the
// proportion of successful runs. nullopt when no run succeeded.
std::optional<double> sp1(std::span<const RunSummary> records);

// SP1(baseline) / SP1(treated); nullopt when either side is undefined.
std::optional<double> speedup(std::span<const RunSummary> baseline,
                              std::span<const RunSummary> treated);

// One experiment cell: a (problem, dimension, algorithm, variant) tuple
// executed for `runs` seeds.
struct Cell {
  std::string problem;
  int dim = 0;
  std::string algo;  // cmaes | saacm-fixed | saacm-adaptive
  int gamma = 1;
  std::optional<int> fixed_lifelength;
  std::optional<int> fixed_n_training;

  std::string id() const;
};

struct ExperimentConfig {
  std::vector<std::string> problems;
  std::vector<int> dims;
  std::vector<std::string> algos;
  int runs = 15;
  long budget = 100000;
  std::uint64_t seed_base = 1;
  std::vector<int> gammas = {1};
  std::optional<int> fixed_lifelength;
  std::optional<int> fixed_n_training;
  std::filesystem::path out_dir;  // empty: no files written
  int jobs = 0;                   // 0: hardware concurrency

  // Controller knobs surfaced for degenerate-mode experiments.
  double tau_err = 0.45;
  double beta_err = 0.2;
  int g_start = 10;
  int lifelength_max = 20;
};

struct CellResult {
  Cell cell;
  std::vector<RunSummary> runs;
  std::vector<control::RunRecord> records;  // kept for in-process analysis
};

// Controller configuration for one cell of the experiment grid.
control::ControllerConfig cell_controller_config(const ExperimentConfig& cfg,
                                                 const Cell& cell,
                                                 double target);

// Executes one cell: `runs` seeded runs (seed_base + index), in parallel
// workers, each seeding its own problem instance. Writes one trace CSV per
// run plus the per-run table and summary CSV when out_dir is set.
CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell);

// Full grid (problem x dim x algo x gamma); writes trace/runs/summary CSV
// files and a speedup table per (problem, dim) whenever a cmaes baseline
// cell is available in the same output directory.
std::vector<CellResult> run_experiment(const ExperimentConfig& cfg);

// Re-reads *_runs.csv from a directory, recomputes SP1 and speedup tables,
// rewrites speedup CSVs and returns a printable report.
std::string report(const std::filesystem::path& dir);

// Formats a double with 17 significant digits (round-trip safe).
std::string format_double(double v);

}  // namespace saacm::harness
