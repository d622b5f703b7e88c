#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "saacm/cma.hpp"
#include "saacm/ranking_svm.hpp"

namespace saacm::control {

// One truly evaluated point. The archive is append-only and chronological;
// surrogate training always works on immutable snapshots of it.
struct ArchiveEntry {
  Eigen::VectorXd point;
  double value = 0.0;
  long generation = 0;
};

using Archive = std::vector<ArchiveEntry>;

// Larger-is-better surrogate evaluation.
using Predictor = std::function<double(const Eigen::VectorXd&)>;

// Builds a predictor from a training window, hyper-parameters and the
// whitening snapshot taken when the build was scheduled. Returns nullopt
// for a non-viable model. The default builder trains the ranking SVM;
// tests may inject oracles.
using SurrogateBuilder = std::function<std::optional<Predictor>(
    std::span<const ArchiveEntry>, const surrogate::SurrogateHyperParams&,
    const surrogate::WhitenTransform&)>;

struct ControllerConfig {
  int g_start = 10;
  int lifelength_max = 20;
  double tau_err = 0.45;
  double beta_err = 0.2;

  bool use_surrogate = true;      // false: plain IPOP-CMA-ES loop
  bool adapt_hyperparams = true;  // false: fixed default hyper-parameters
  std::optional<int> fixed_lifelength;
  std::optional<int> fixed_n_training;

  int lambda = 0;  // 0: default population size for the dimension
  double initial_sigma = 2.0;
  double init_box = 4.0;  // initial mean uniform in [-init_box, init_box]^d

  int hyper_population = 20;
  double hyper_sigma = 0.3;

  std::optional<double> target;  // stop when best true value <= target

  bool ipop_restarts = true;
  cma::RestartPolicy restart;

  SurrogateBuilder surrogate_builder;  // empty: ranking SVM
};

struct TraceRow {
  long generation = 0;
  long evaluations = 0;
  double best_value = std::numeric_limits<double>::infinity();
  double err = 0.5;
  int lifelength = 0;
  surrogate::SurrogateHyperParams alpha;
  int lambda = 0;
  bool true_generation = false;
};

struct RunRecord {
  std::uint64_t seed = 0;
  bool success = false;
  long evaluations = 0;  // true objective calls only
  double best_value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_point;
  int restarts = 0;
  std::vector<TraceRow> trace;
};

// Normalization ranges of the hyper-parameter vector (N_training, C_base,
// C_pow, c_sigma) for online tuning.
struct HyperRanges {
  Eigen::Vector4d lo;
  Eigen::Vector4d hi;
};
HyperRanges hyperparam_ranges(int d);

// Offline-tuned defaults: N_training = floor(40 + 4 d^1.7), C_base 6,
// C_pow 3, c_sigma 1.
surrogate::SurrogateHyperParams default_hyperparams(int d);

Eigen::Vector4d normalize_hyperparams(const surrogate::SurrogateHyperParams& hp,
                                      int d);

// Clamps into [0,1]^4 and maps linearly onto the ranges; N_training is
// rounded to the nearest integer.
surrogate::SurrogateHyperParams denormalize_hyperparams(
    const Eigen::Vector4d& candidate, int d);

// Fraction of misordered pairs of the test set under the predictor, all
// pairs weighted 1. Ties count as violations. Throws std::invalid_argument
// for fewer than 2 points.
double measure_surrogate_error(const Predictor& predict,
                               std::span<const ArchiveEntry> test_set);

// Exponential relaxation err <- (1-beta) err + beta fresh.
double relax_error(double err, double fresh_err, double beta);

// Lifelength floor((tau - err)/tau * n_max) clamped to [0, n_max];
// 0 whenever tau <= 0.
int adjust_lifelength(double err, double tau, int n_max);

// Ranking error of the model trained from `candidate` (normalized
// hyper-parameters) on the snapshot window, measured on the test batch.
// Non-viable training yields the fixed penalty 2.0.
constexpr double kNonViablePenalty = 2.0;
double hyperparam_objective(const Eigen::Vector4d& candidate,
                            std::span<const ArchiveEntry> snapshot,
                            const surrogate::WhitenTransform& transform,
                            std::span<const ArchiveEntry> test_set, int d,
                            const SurrogateBuilder& builder);

// Full optimization run: g_start true generations, then cycles of
// surrogate build / lifelength surrogate generations / one true
// generation / error measurement and relaxation / lifelength adjustment /
// hyper-parameter adaptation, with IPOP restarts, until the evaluation
// budget is exhausted or the target is reached.
RunRecord run(const cma::Objective& objective, int d, long budget,
              const ControllerConfig& config, std::uint64_t seed);

}  // namespace saacm::control
