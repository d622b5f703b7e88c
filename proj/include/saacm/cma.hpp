#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "saacm/rng.hpp"

namespace saacm::cma {

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Offspring of a single generation. `ranking` sorts fitnesses ascending
// (minimization) with stable tie-break by candidate index; non-finite
// fitnesses rank worst.
struct Generation {
  std::vector<Eigen::VectorXd> candidates;
  std::vector<double> fitnesses;
  std::vector<int> ranking;
};

// Full evolution state of one (mu/mu_w, lambda)-CMA-ES instance.
//
// The eigendecomposition cov = eig_basis * diag(eig_scale^2) * eig_basis^T
// is cached and refreshed at most every `eig_interval` generations; at the
// dimensions this library targets the interval evaluates to 1, so the cache
// is fresh after every update.
struct OptimizerState {
  int dim = 0;
  Eigen::VectorXd mean;
  double sigma = 0.0;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd eig_basis;  // B: columns are eigenvectors of cov
  Eigen::VectorXd eig_scale;  // D: sqrt of eigenvalues of cov
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_c;
  int lambda = 0;
  int mu = 0;
  Eigen::VectorXd weights;  // mu entries, positive, non-increasing, sum 1

  // Strategy constants, fixed at init.
  double mu_eff = 0.0;
  double cs = 0.0;
  double ds = 0.0;
  double cc = 0.0;
  double c1 = 0.0;
  double cmu = 0.0;
  double chi_n = 0.0;
  int eig_interval = 1;

  long generation = 0;
  long eig_generation = 0;
  Rng rng{0};
};

// IPOP restart control. Population size after k restarts is
// lambda_default * 2^k.
struct RestartPolicy {
  int restarts_done = 0;
  int population_multiplier = 1;
  double stop_tolfun = 1e-12;
  double stop_tolx = 1e-12;
  double max_condition = 1e14;
  long max_evaluations = 0;  // 0: no cap at this layer
};

// Default population size 4 + floor(3 ln d).
int default_population(int d);

// Fresh optimizer state: identity covariance, zero paths, standard
// strategy constants for (mu/mu_w, lambda). lambda == 0 selects the
// default population size. Throws std::invalid_argument on d < 1,
// sigma <= 0, given lambda < 4, or a mean of the wrong length.
OptimizerState init_cma(int d, const Eigen::VectorXd& initial_mean,
                        double initial_sigma, int lambda = 0,
                        std::uint64_t seed = 1);

// One generation: sample lambda candidates mean + sigma*B*D*N(0,I),
// evaluate all of them, update mean, paths, covariance and step size by
// rank-based recombination. Deterministic given the state's rng.
// Non-finite fitness values rank worst; if every candidate is non-finite
// the update cannot be ranked and a std::runtime_error is thrown.
Generation gen_cma(OptimizerState& state, const Objective& objective);

// Trailing window length used by should_restart.
int restart_window(int d, int lambda);

// True when the trailing best-of-generation range stalls below
// stop_tolfun over a full window, the step size collapses below
// stop_tolx, or the covariance condition number exceeds max_condition.
bool should_restart(const OptimizerState& state, const RestartPolicy& policy,
                    std::span<const double> recent_best);

// Symmetric positive-definite C^{-1/2} of the current covariance,
// computed from a fresh eigendecomposition.
Eigen::MatrixXd inverse_sqrt_cov(const OptimizerState& state);

// Recompute B and D from cov. force skips the staleness check.
void refresh_eigensystem(OptimizerState& state, bool force = false);

}  // namespace saacm::cma
