#include "saacm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace saacm::harness {

namespace fs = std::filesystem;

namespace {

void parallel_for(int jobs, int n, const std::function<void(int)>& fn) {
  jobs = jobs > 0 ? jobs
                  : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string int_or(const std::optional<int>& v) {
  return v ? std::to_string(*v) : std::string();
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

struct ParsedCell {
  Cell cell;
  std::vector<RunSummary> runs;
};

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::optional<double> sp1(std::span<const RunSummary> records) {
  if (records.empty()) return std::nullopt;
  long successes = 0;
  double eval_sum = 0.0;
  for (const auto& r : records) {
    if (r.success) {
      ++successes;
      eval_sum += static_cast<double>(r.evaluations);
    }
  }
  if (successes == 0) return std::nullopt;
  const double mean = eval_sum / static_cast<double>(successes);
  const double rate =
      static_cast<double>(successes) / static_cast<double>(records.size());
  return mean / rate;
}

std::optional<double> speedup(std::span<const RunSummary> baseline,
                              std::span<const RunSummary> treated) {
  const auto base = sp1(baseline);
  const auto treat = sp1(treated);
  if (!base || !treat) return std::nullopt;
  return *base / *treat;
}

std::string Cell::id() const {
  std::string s = problem + "_d" + std::to_string(dim) + "_" + algo + "_g" +
                  std::to_string(gamma);
  if (fixed_lifelength) s += "_nhat" + std::to_string(*fixed_lifelength);
  if (fixed_n_training) s += "_ntr" + std::to_string(*fixed_n_training);
  return s;
}

control::ControllerConfig cell_controller_config(const ExperimentConfig& cfg,
                                                 const Cell& cell,
                                                 double target) {
  control::ControllerConfig cc;
  cc.use_surrogate = cell.algo != "cmaes";
  cc.adapt_hyperparams = cell.algo == "saacm-adaptive";
  cc.fixed_lifelength = cell.fixed_lifelength;
  cc.fixed_n_training = cell.fixed_n_training;
  cc.lambda = cma::default_population(cell.dim) * cell.gamma;
  cc.target = target;
  cc.tau_err = cfg.tau_err;
  cc.beta_err = cfg.beta_err;
  cc.g_start = cfg.g_start;
  cc.lifelength_max = cfg.lifelength_max;
  return cc;
}

namespace {

void write_trace_csv(const fs::path& path, const control::RunRecord& rec,
                     double f_opt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "generation,evaluations,best_gap,err,lifelength,n_training,c_base,"
         "c_pow,c_sigma,lambda\n";
  for (const auto& row : rec.trace) {
    out << row.generation << ',' << row.evaluations << ','
        << format_double(row.best_value - f_opt) << ','
        << format_double(row.err) << ',' << row.lifelength << ','
        << row.alpha.n_training << ',' << format_double(row.alpha.c_base)
        << ',' << format_double(row.alpha.c_pow) << ','
        << format_double(row.alpha.c_sigma) << ',' << row.lambda << '\n';
  }
}

void write_runs_csv(const fs::path& path, const Cell& cell,
                    std::span<const RunSummary> runs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "problem,dim,algo,gamma,fixed_lifelength,fixed_n_training,seed,"
         "success,evaluations,best_gap\n";
  for (const auto& r : runs) {
    out << cell.problem << ',' << cell.dim << ',' << cell.algo << ','
        << cell.gamma << ',' << int_or(cell.fixed_lifelength) << ','
        << int_or(cell.fixed_n_training) << ',' << r.seed << ','
        << (r.success ? 1 : 0) << ',' << r.evaluations << ','
        << format_double(r.best_gap) << '\n';
  }
}

void write_summary_csv(const fs::path& path, const Cell& cell,
                       std::span<const RunSummary> runs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  long successes = 0;
  std::vector<double> success_evals;
  for (const auto& r : runs) {
    if (r.success) {
      ++successes;
      success_evals.push_back(static_cast<double>(r.evaluations));
    }
  }
  const auto s = sp1(runs);
  out << "cell,problem,dim,algo,gamma,fixed_lifelength,fixed_n_training,runs,"
         "successes,success_rate,sp1,median_evaluations\n";
  out << cell.id() << ',' << cell.problem << ',' << cell.dim << ','
      << cell.algo << ',' << cell.gamma << ',' << int_or(cell.fixed_lifelength)
      << ',' << int_or(cell.fixed_n_training) << ',' << runs.size() << ','
      << successes << ','
      << format_double(static_cast<double>(successes) /
                       static_cast<double>(runs.size()))
      << ',' << (s ? format_double(*s) : "undefined") << ','
      << (success_evals.empty() ? "undefined"
                                : format_double(median_of(success_evals)))
      << '\n';
}

std::vector<ParsedCell> read_runs_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 9 && name.substr(name.size() - 9) == "_runs.csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<ParsedCell> cells;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) continue;
    std::string line;
    std::getline(in, line);  // header
    ParsedCell parsed;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() < 10) continue;
      if (first) {
        parsed.cell.problem = f[0];
        parsed.cell.dim = std::stoi(f[1]);
        parsed.cell.algo = f[2];
        parsed.cell.gamma = std::stoi(f[3]);
        if (!f[4].empty()) parsed.cell.fixed_lifelength = std::stoi(f[4]);
        if (!f[5].empty()) parsed.cell.fixed_n_training = std::stoi(f[5]);
        first = false;
      }
      RunSummary r;
      r.seed = std::stoull(f[6]);
      r.success = f[7] == "1";
      r.evaluations = std::stol(f[8]);
      r.best_gap = std::stod(f[9]);
      parsed.runs.push_back(r);
    }
    if (!first) cells.push_back(std::move(parsed));
  }
  return cells;
}

std::string write_speedup_tables(const fs::path& dir,
                                 const std::vector<ParsedCell>& cells) {
  std::ostringstream text;
  // Baselines keyed by (problem, dim, gamma).
  std::map<std::string, const ParsedCell*> baselines;
  for (const auto& c : cells) {
    if (c.cell.algo == "cmaes" && !c.cell.fixed_lifelength &&
        !c.cell.fixed_n_training)
      baselines[c.cell.problem + "|" + std::to_string(c.cell.dim) + "|" +
                std::to_string(c.cell.gamma)] = &c;
  }

  std::map<std::string, std::vector<const ParsedCell*>> by_problem;
  for (const auto& c : cells) {
    if (c.cell.algo == "cmaes") continue;
    by_problem[c.cell.problem + "_d" + std::to_string(c.cell.dim)].push_back(&c);
  }

  for (const auto& [key, treated_cells] : by_problem) {
    const fs::path path = dir / ("speedup_" + key + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "treated_cell,gamma,sp1_baseline,sp1_treated,speedup\n";
    text << "speedup table " << key << ":\n";
    for (const ParsedCell* t : treated_cells) {
      const auto base_it =
          baselines.find(t->cell.problem + "|" + std::to_string(t->cell.dim) +
                         "|" + std::to_string(t->cell.gamma));
      std::optional<double> base_sp1, treat_sp1, ratio;
      treat_sp1 = sp1(t->runs);
      if (base_it != baselines.end()) {
        base_sp1 = sp1(base_it->second->runs);
        ratio = speedup(base_it->second->runs, t->runs);
      }
      const auto fmt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("undefined");
      };
      out << t->cell.id() << ',' << t->cell.gamma << ',' << fmt(base_sp1)
          << ',' << fmt(treat_sp1) << ',' << fmt(ratio) << '\n';
      text << "  " << t->cell.id() << ": sp1=" << fmt(treat_sp1)
           << " baseline=" << fmt(base_sp1) << " speedup=" << fmt(ratio)
           << '\n';
    }
  }
  return text.str();
}

}  // namespace

CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell) {
  CellResult result;
  result.cell = cell;
  result.runs.resize(cfg.runs);
  result.records.resize(cfg.runs);

  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  parallel_for(cfg.jobs, cfg.runs, [&](int i) {
    const std::uint64_t seed = cfg.seed_base + static_cast<std::uint64_t>(i);
    const testbed::BenchmarkProblem problem =
        testbed::make_problem(cell.problem, cell.dim, seed);
    const control::ControllerConfig cc =
        cell_controller_config(cfg, cell, problem.target);
    control::RunRecord rec = control::run(
        [&problem](const Eigen::VectorXd& x) { return problem(x); },
        cell.dim, cfg.budget, cc, seed);
    result.runs[i] = RunSummary{seed, rec.success, rec.evaluations,
                                rec.best_value - problem.f_opt};
    if (!cfg.out_dir.empty()) {
      write_trace_csv(
          cfg.out_dir / (cell.id() + "_seed" + std::to_string(seed) +
                         "_trace.csv"),
          rec, problem.f_opt);
    }
    result.records[i] = std::move(rec);
  });

  if (!cfg.out_dir.empty()) {
    write_runs_csv(cfg.out_dir / (cell.id() + "_runs.csv"), cell, result.runs);
    write_summary_csv(cfg.out_dir / (cell.id() + "_summary.csv"), cell,
                      result.runs);
  }
  return result;
}

std::vector<CellResult> run_experiment(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (const auto& problem : cfg.problems)
    for (int dim : cfg.dims)
      for (const auto& algo : cfg.algos)
        for (int gamma : cfg.gammas) {
          Cell cell;
          cell.problem = problem;
          cell.dim = dim;
          cell.algo = algo;
          cell.gamma = gamma;
          if (algo != "cmaes") {
            cell.fixed_lifelength = cfg.fixed_lifelength;
            cell.fixed_n_training = cfg.fixed_n_training;
          }
          cells.push_back(std::move(cell));
        }

  std::vector<CellResult> results;
  results.reserve(cells.size());
  for (const auto& cell : cells) results.push_back(run_cell(cfg, cell));

  if (!cfg.out_dir.empty())
    write_speedup_tables(cfg.out_dir, read_runs_files(cfg.out_dir));
  return results;
}

std::string report(const std::filesystem::path& dir) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("report: not a directory: " + dir.string());
  const auto cells = read_runs_files(dir);
  std::ostringstream text;
  for (const auto& c : cells) {
    const auto s = sp1(c.runs);
    long successes = 0;
    for (const auto& r : c.runs) successes += r.success ? 1 : 0;
    text << c.cell.id() << ": runs=" << c.runs.size()
         << " successes=" << successes
         << " sp1=" << (s ? format_double(*s) : "undefined") << '\n';
  }
  text << write_speedup_tables(dir, cells);
  return text.str();
}

}  // namespace saacm::harness
