#include "saacm/ranking_svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace saacm::surrogate {

namespace {

constexpr double kDiagFloor = 1e-12;

double sort_key(double f) {
  return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::VectorXd whiten(const Eigen::VectorXd& x, const WhitenTransform& t) {
  if (x.size() != t.center.size() || t.inv_sqrt_c.cols() != x.size())
    throw std::invalid_argument("whiten: dimension mismatch");
  return t.inv_sqrt_c * (x - t.center);
}

WhitenTransform whiten_transform(const cma::OptimizerState& opt) {
  return WhitenTransform{cma::inverse_sqrt_cov(opt), opt.mean};
}

double kernel(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
              double sigma_k) {
  if (!(sigma_k > 0.0))
    throw std::invalid_argument("kernel: sigma_k must be > 0");
  if (u.size() != v.size())
    throw std::invalid_argument("kernel: dimension mismatch");
  return std::exp(-(u - v).squaredNorm() / (2.0 * sigma_k * sigma_k));
}

double kernel_width(const std::vector<Eigen::VectorXd>& points,
                    double c_sigma) {
  const std::size_t n = points.size();
  if (n < 2)
    throw std::invalid_argument("kernel_width: need at least 2 points");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      total += (points[i] - points[j]).norm();
  const double mean = total / (0.5 * n * (n - 1));
  const double width = c_sigma * mean;
  return width > 0.0 ? width : 1.0;
}

Eigen::VectorXd violation_costs(int n, double c_base, double c_pow) {
  if (n < 2)
    throw std::invalid_argument("violation_costs: need n >= 2");
  Eigen::VectorXd costs(n - 1);
  const double scale = std::pow(10.0, c_base);
  for (int i = 1; i < n; ++i)
    costs[i - 1] = scale * std::pow(static_cast<double>(n - i), c_pow);
  return costs;
}

DualSolution solve_ranking_dual(const Eigen::MatrixXd& gram,
                                const Eigen::VectorXd& costs,
                                long max_updates, double kkt_tol) {
  const Eigen::Index m = gram.rows();
  DualSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(m);  // G * alpha, kept incrementally

  while (sol.updates < max_updates) {
    for (Eigen::Index i = 0; i < m && sol.updates < max_updates; ++i) {
      const double gii = gram(i, i);
      ++sol.updates;
      if (gii <= kDiagFloor) continue;  // unsatisfiable coordinate, leave at 0
      const double grad = 1.0 - s[i];
      const double target =
          std::clamp(sol.alpha[i] + grad / gii, 0.0, costs[i]);
      const double delta = target - sol.alpha[i];
      if (delta != 0.0) {
        sol.alpha[i] = target;
        s.noalias() += delta * gram.col(i);
      }
    }
    sol.sweep_objectives.push_back(sol.alpha.sum() - 0.5 * sol.alpha.dot(s));

    double violation = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (gram(i, i) <= kDiagFloor) continue;
      const double grad = 1.0 - s[i];
      double v;
      if (sol.alpha[i] <= 0.0)
        v = std::max(grad, 0.0);
      else if (sol.alpha[i] >= costs[i])
        v = std::max(-grad, 0.0);
      else
        v = std::abs(grad);
      violation = std::max(violation, v);
    }
    if (violation <= kkt_tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

SurrogateModel train_ranking_svm(std::span<const TrainingPoint> points,
                                 const SurrogateHyperParams& hp,
                                 const WhitenTransform& transform) {
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  if (n < 2)
    throw std::invalid_argument("train_ranking_svm: need at least 2 points");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sort_key(points[a].second) < sort_key(points[b].second);
  });

  const Eigen::Index d = transform.center.size();
  SurrogateModel model;
  model.transform = transform;
  model.points.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    model.points.row(i) = whiten(points[order[i]].first, transform).transpose();
  if (!model.points.allFinite())
    throw NonViableModelError("train_ranking_svm: whitening produced non-finite values");

  // Pairwise squared distances of the whitened set; reused for dispersion
  // and for the kernel matrix.
  const Eigen::VectorXd sq = model.points.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                       2.0 * model.points * model.points.transpose();
  d2 = d2.cwiseMax(0.0);

  double dist_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) dist_sum += std::sqrt(d2(i, j));
  const double dispersion = dist_sum / (0.5 * n * (n - 1));
  model.sigma_k = hp.c_sigma * dispersion;
  if (!(model.sigma_k > 0.0)) model.sigma_k = 1.0;
  if (!std::isfinite(model.sigma_k))
    throw NonViableModelError("train_ranking_svm: ill-conditioned kernel width");

  const Eigen::MatrixXd k =
      (-d2 / (2.0 * model.sigma_k * model.sigma_k)).array().exp();

  const Eigen::Index m = n - 1;
  Eigen::MatrixXd gram(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      gram(i, j) =
          k(i, j) - k(i, j + 1) - k(i + 1, j) + k(i + 1, j + 1);
  if (!gram.allFinite())
    throw NonViableModelError("train_ranking_svm: non-finite Gram matrix");
  if (gram.diagonal().maxCoeff() <= kDiagFloor)
    throw NonViableModelError("train_ranking_svm: Gram singular to working precision");

  model.costs = violation_costs(static_cast<int>(n), hp.c_base, hp.c_pow);
  DualSolution sol =
      solve_ranking_dual(gram, model.costs, 1000L * static_cast<long>(n));
  model.multipliers = std::move(sol.alpha);
  model.converged = sol.converged;
  model.sweep_objectives = std::move(sol.sweep_objectives);

  // Surrogate values on the training points, straight from the kernel
  // matrix: f_hat(x_j) = sum_i alpha_i (K(i,j) - K(i+1,j)).
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (model.multipliers[i] == 0.0) continue;
    scores += model.multipliers[i] * (k.row(i) - k.row(i + 1)).transpose();
  }
  int violated = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    if (scores[i] <= scores[i + 1]) ++violated;
  model.train_error = static_cast<double>(violated) / static_cast<double>(m);
  return model;
}

SurrogateModel train_ranking_svm(std::span<const TrainingPoint> points,
                                 const SurrogateHyperParams& hp,
                                 const cma::OptimizerState& opt) {
  return train_ranking_svm(points, hp, whiten_transform(opt));
}

double predict(const SurrogateModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd xw = whiten(x, model.transform);
  const Eigen::Index n = model.points.rows();
  const Eigen::VectorXd d2 =
      (model.points.rowwise() - xw.transpose()).rowwise().squaredNorm();
  const Eigen::VectorXd k =
      (-d2 / (2.0 * model.sigma_k * model.sigma_k)).array().exp();
  double value = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    value += model.multipliers[i] * (k[i] - k[i + 1]);
  return value;
}

}  // namespace saacm::surrogate
