#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "saacm/cma.hpp"

namespace saacm::surrogate {

// Learning hyper-parameters of the ranking surrogate.
struct SurrogateHyperParams {
  int n_training = 0;
  double c_base = 6.0;
  double c_pow = 3.0;
  double c_sigma = 1.0;
};

// Snapshot of the search distribution used to whiten inputs: maps
// x -> inv_sqrt_c * (x - center) so Euclidean distance in the image equals
// Mahalanobis distance under the covariance the snapshot was taken from.
struct WhitenTransform {
  Eigen::MatrixXd inv_sqrt_c;
  Eigen::VectorXd center;
};

// Raised when the training data / kernel are too ill-conditioned to train
// (non-finite Gram entries or a Gram that is zero to working precision).
// Callers in the adaptation loop convert this into a fitness penalty.
class NonViableModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Eigen::VectorXd whiten(const Eigen::VectorXd& x, const WhitenTransform& t);

WhitenTransform whiten_transform(const cma::OptimizerState& opt);

// RBF kernel exp(-|u-v|^2 / (2 sigma_k^2)); value in (0, 1].
double kernel(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
              double sigma_k);

// Kernel width c_sigma times the dispersion of the training points (mean
// Euclidean distance over all unordered pairs). Falls back to 1 when all
// points coincide.
double kernel_width(const std::vector<Eigen::VectorXd>& points,
                    double c_sigma);

// Constraint violation costs C_i = 10^c_base * (n - i)^c_pow, i = 1..n-1:
// ordering mistakes on top-ranked samples cost more.
Eigen::VectorXd violation_costs(int n, double c_base, double c_pow);

// Box-constrained dual solved by cyclic coordinate ascent:
// maximize sum(alpha) - 0.5 alpha^T G alpha subject to 0 <= alpha_i <= C_i.
struct DualSolution {
  Eigen::VectorXd alpha;
  std::vector<double> sweep_objectives;  // dual value after each sweep
  long updates = 0;
  bool converged = false;  // KKT satisfied before the update cap
};

DualSolution solve_ranking_dual(const Eigen::MatrixXd& gram,
                                const Eigen::VectorXd& costs,
                                long max_updates, double kkt_tol = 1e-8);

// Trained rank-based surrogate. Training points are stored whitened and
// ordered best-first; predictions use the build-time transform even as the
// optimizer drifts. Immutable after training, safe for concurrent reads.
struct SurrogateModel {
  WhitenTransform transform;
  Eigen::MatrixXd points;       // N x d, whitened, best objective first
  Eigen::VectorXd multipliers;  // N-1 dual multipliers
  double sigma_k = 0.0;
  Eigen::VectorXd costs;  // N-1 violation costs
  double train_error = 0.0;
  bool converged = false;  // dual KKT reached before the update cap
  std::vector<double> sweep_objectives;
};

using TrainingPoint = std::pair<Eigen::VectorXd, double>;

// Trains the ranking surrogate on the given (point, objective value) set
// with the consecutive-pair constraint reduction. Sorts ascending by value
// (stable), whitens with the supplied snapshot, derives sigma_k and the
// violation costs from hp, then solves the dual with an update cap of
// 1000 * N. Throws std::invalid_argument for < 2 points and
// NonViableModelError when the kernel is numerically unusable.
SurrogateModel train_ranking_svm(std::span<const TrainingPoint> points,
                                 const SurrogateHyperParams& hp,
                                 const WhitenTransform& transform);

// Convenience overload taking the transform from an optimizer state.
SurrogateModel train_ranking_svm(std::span<const TrainingPoint> points,
                                 const SurrogateHyperParams& hp,
                                 const cma::OptimizerState& opt);

// Surrogate value at x; larger means better (rank-1 side). The controller
// negates this to obtain a minimization objective.
double predict(const SurrogateModel& model, const Eigen::VectorXd& x);

}  // namespace saacm::surrogate
