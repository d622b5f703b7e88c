// Experiment runner for the surrogate-assisted CMA-ES library: seeded
// batches of baseline and surrogate-assisted runs, SP1/speedup tables and
// plot-ready CSV traces.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>

#include "saacm/harness.hpp"

namespace {

struct CommonArgs {
  std::vector<std::string> problems{"sphere"};
  std::vector<int> dims{10};
  std::vector<std::string> algos{"cmaes"};
  int runs = 15;
  long budget = 100000;
  std::uint64_t seed = 1;
  std::vector<int> gammas{1};
  int fixed_lifelength = -1;  // <0: adaptive
  int fixed_n_training = -1;  // <0: default / adapted
  std::string out;
  int jobs = 0;
  double tau_err = 0.45;
  double beta_err = 0.2;
  int g_start = 10;
};

void add_common_options(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--problem", a.problems, "benchmark problem name(s)");
  cmd->add_option("--dim", a.dims, "problem dimension(s)");
  cmd->add_option("--runs", a.runs, "runs per cell");
  cmd->add_option("--budget", a.budget, "true-evaluation budget per run");
  cmd->add_option("--seed", a.seed, "base seed; run i uses seed+i");
  cmd->add_option("--gamma", a.gammas,
                  "population size multiplier(s) over the default");
  cmd->add_option("--fixed-lifelength", a.fixed_lifelength,
                  "pin the surrogate lifelength (negative: adaptive)");
  cmd->add_option("--n-training", a.fixed_n_training,
                  "pin the number of training points (negative: default)");
  cmd->add_option("--out", a.out, "output directory for CSV files")
      ->envname("SAACM_OUT_DIR");
  cmd->add_option("--jobs", a.jobs, "parallel run workers (0: all cores)");
  cmd->add_option("--tau-err", a.tau_err, "surrogate error threshold");
  cmd->add_option("--beta-err", a.beta_err, "error relaxation factor");
  cmd->add_option("--g-start", a.g_start,
                  "true-objective generations before the first surrogate");
}

saacm::harness::ExperimentConfig to_config(const CommonArgs& a) {
  saacm::harness::ExperimentConfig cfg;
  cfg.problems = a.problems;
  cfg.dims = a.dims;
  cfg.algos = a.algos;
  cfg.runs = a.runs;
  cfg.budget = a.budget;
  cfg.seed_base = a.seed;
  cfg.gammas = a.gammas;
  if (a.fixed_lifelength >= 0) cfg.fixed_lifelength = a.fixed_lifelength;
  if (a.fixed_n_training >= 0) cfg.fixed_n_training = a.fixed_n_training;
  cfg.out_dir = a.out;
  cfg.jobs = a.jobs;
  cfg.tau_err = a.tau_err;
  cfg.beta_err = a.beta_err;
  cfg.g_start = a.g_start;
  return cfg;
}

void print_results(const std::vector<saacm::harness::CellResult>& results) {
  for (const auto& r : results) {
    long successes = 0;
    for (const auto& run : r.runs) successes += run.success ? 1 : 0;
    const auto s = saacm::harness::sp1(r.runs);
    std::cout << r.cell.id() << ": successes " << successes << "/"
              << r.runs.size() << ", sp1 "
              << (s ? saacm::harness::format_double(*s) : "undefined")
              << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surrogate-assisted CMA-ES experiment harness"};
  app.set_config("--config", "", "flat key=value config file; flags win");
  app.require_subcommand(1);

  CommonArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment grid");
  run_cmd->add_option("--algo", run_args.algos,
                      "algorithm(s): cmaes, saacm-fixed, saacm-adaptive");
  add_common_options(run_cmd, run_args);

  CommonArgs sweep_args;
  std::string sweep_param = "lifelength";
  std::vector<int> sweep_values;
  bool with_baseline = false;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "grid over lifelength, n-training or gamma");
  sweep_cmd
      ->add_option("--param", sweep_param,
                   "swept parameter: lifelength | n-training | gamma")
      ->check(CLI::IsMember({"lifelength", "n-training", "gamma"}));
  sweep_cmd->add_option("--values", sweep_values, "swept values")->required();
  sweep_cmd->add_flag("--with-baseline", with_baseline,
                      "also run the cmaes baseline for each gamma");
  sweep_cmd->add_option("--algo", sweep_args.algos,
                        "treated algorithm (default saacm-fixed)");
  add_common_options(sweep_cmd, sweep_args);
  sweep_args.algos = {"saacm-fixed"};

  std::string report_dir;
  CLI::App* report_cmd = app.add_subcommand(
      "report", "recompute SP1/speedup tables from existing CSV files");
  report_cmd->add_option("--out", report_dir, "directory holding runs CSVs")
      ->envname("SAACM_OUT_DIR")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto results = saacm::harness::run_experiment(to_config(run_args));
      print_results(results);
    } else if (sweep_cmd->parsed()) {
      std::vector<saacm::harness::CellResult> results;
      if (sweep_param == "gamma") {
        auto cfg = to_config(sweep_args);
        cfg.gammas = sweep_values;
        if (with_baseline) {
          std::set<std::string> algos(cfg.algos.begin(), cfg.algos.end());
          algos.insert("cmaes");
          cfg.algos.assign(algos.begin(), algos.end());
        }
        results = saacm::harness::run_experiment(cfg);
      } else {
        for (int value : sweep_values) {
          auto cfg = to_config(sweep_args);
          if (sweep_param == "lifelength")
            cfg.fixed_lifelength = value;
          else
            cfg.fixed_n_training = value;
          auto part = saacm::harness::run_experiment(cfg);
          results.insert(results.end(), part.begin(), part.end());
        }
        if (with_baseline) {
          auto cfg = to_config(sweep_args);
          cfg.algos = {"cmaes"};
          auto part = saacm::harness::run_experiment(cfg);
          results.insert(results.end(), part.begin(), part.end());
        }
      }
      print_results(results);
      if (!sweep_args.out.empty())
        std::cout << saacm::harness::report(sweep_args.out);
    } else if (report_cmd->parsed()) {
      std::cout << saacm::harness::report(report_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
