#include "saacm/cma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace saacm::cma {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sort_key(double f) { return std::isfinite(f) ? f : kInf; }

}  // namespace

int default_population(int d) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(d))));
}

OptimizerState init_cma(int d, const Eigen::VectorXd& initial_mean,
                        double initial_sigma, int lambda, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("init_cma: dimension must be >= 1");
  if (!(initial_sigma > 0.0))
    throw std::invalid_argument("init_cma: initial_sigma must be > 0");
  if (initial_mean.size() != d)
    throw std::invalid_argument("init_cma: mean length does not match dimension");
  if (lambda != 0 && lambda < 4)
    throw std::invalid_argument("init_cma: lambda must be >= 4");

  OptimizerState s;
  s.dim = d;
  s.mean = initial_mean;
  s.sigma = initial_sigma;
  s.cov = Eigen::MatrixXd::Identity(d, d);
  s.eig_basis = Eigen::MatrixXd::Identity(d, d);
  s.eig_scale = Eigen::VectorXd::Ones(d);
  s.path_sigma = Eigen::VectorXd::Zero(d);
  s.path_c = Eigen::VectorXd::Zero(d);
  s.lambda = lambda == 0 ? default_population(d) : lambda;
  s.mu = s.lambda / 2;

  Eigen::VectorXd w(s.mu);
  const double base = std::log((s.lambda + 1.0) / 2.0);
  for (int i = 0; i < s.mu; ++i) w[i] = base - std::log(i + 1.0);
  const double wsum = w.sum();
  s.mu_eff = wsum * wsum / w.squaredNorm();
  s.weights = w / wsum;

  const double n = static_cast<double>(d);
  s.cs = (s.mu_eff + 2.0) / (n + s.mu_eff + 5.0);
  s.ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (n + 1.0)) - 1.0) + s.cs;
  s.cc = (4.0 + s.mu_eff / n) / (n + 4.0 + 2.0 * s.mu_eff / n);
  s.c1 = 2.0 / ((n + 1.3) * (n + 1.3) + s.mu_eff);
  s.cmu = std::min(1.0 - s.c1, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) /
                                   ((n + 2.0) * (n + 2.0) + s.mu_eff));
  s.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  s.eig_interval = std::max(
      1, static_cast<int>(std::floor(1.0 / (10.0 * n * (s.c1 + s.cmu)))));
  s.rng = Rng(seed);
  return s;
}

void refresh_eigensystem(OptimizerState& s, bool force) {
  if (!force && s.generation - s.eig_generation < s.eig_interval) return;
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.cov);
  Eigen::VectorXd evals = eig.eigenvalues();
  const double floor_val = std::max(evals.maxCoeff(), 1e-300) * 1e-20;
  for (int i = 0; i < evals.size(); ++i)
    evals[i] = std::max(evals[i], floor_val);
  s.eig_basis = eig.eigenvectors();
  s.eig_scale = evals.cwiseSqrt();
  s.eig_generation = s.generation;
}

Generation gen_cma(OptimizerState& s, const Objective& objective) {
  Generation gen;
  gen.candidates.reserve(s.lambda);
  gen.fitnesses.resize(s.lambda);
  for (int k = 0; k < s.lambda; ++k) {
    Eigen::VectorXd z(s.dim);
    for (int i = 0; i < s.dim; ++i) z[i] = s.rng.normal();
    gen.candidates.push_back(s.mean +
                             s.sigma * (s.eig_basis * s.eig_scale.cwiseProduct(z)));
  }
  bool any_finite = false;
  for (int k = 0; k < s.lambda; ++k) {
    gen.fitnesses[k] = objective(gen.candidates[k]);
    any_finite |= std::isfinite(gen.fitnesses[k]);
  }
  if (!any_finite)
    throw std::runtime_error("gen_cma: objective returned no finite value");

  gen.ranking.resize(s.lambda);
  std::iota(gen.ranking.begin(), gen.ranking.end(), 0);
  std::stable_sort(gen.ranking.begin(), gen.ranking.end(), [&](int a, int b) {
    return sort_key(gen.fitnesses[a]) < sort_key(gen.fitnesses[b]);
  });

  const Eigen::VectorXd old_mean = s.mean;
  Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(s.dim);
  for (int i = 0; i < s.mu; ++i)
    new_mean += s.weights[i] * gen.candidates[gen.ranking[i]];

  const Eigen::VectorXd delta = (new_mean - old_mean) / s.sigma;
  // C^{-1/2} * delta through the cached eigensystem.
  const Eigen::VectorXd delta_white =
      s.eig_basis *
      (s.eig_basis.transpose() * delta).cwiseQuotient(s.eig_scale);

  s.path_sigma = (1.0 - s.cs) * s.path_sigma +
                 std::sqrt(s.cs * (2.0 - s.cs) * s.mu_eff) * delta_white;

  const long g1 = s.generation + 1;
  const double ps_norm = s.path_sigma.norm();
  const double expected =
      std::sqrt(1.0 - std::pow(1.0 - s.cs, 2.0 * static_cast<double>(g1)));
  const bool hsig =
      ps_norm / expected / s.chi_n < 1.4 + 2.0 / (s.dim + 1.0);

  s.path_c = (1.0 - s.cc) * s.path_c;
  if (hsig)
    s.path_c += std::sqrt(s.cc * (2.0 - s.cc) * s.mu_eff) * delta;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(s.dim, s.dim);
  for (int i = 0; i < s.mu; ++i) {
    const Eigen::VectorXd y =
        (gen.candidates[gen.ranking[i]] - old_mean) / s.sigma;
    rank_mu.noalias() += s.weights[i] * y * y.transpose();
  }
  const double hsig_corr = hsig ? 0.0 : s.cc * (2.0 - s.cc);
  s.cov = (1.0 - s.c1 - s.cmu) * s.cov +
          s.c1 * (s.path_c * s.path_c.transpose() + hsig_corr * s.cov) +
          s.cmu * rank_mu;

  s.sigma *= std::exp((s.cs / s.ds) * (ps_norm / s.chi_n - 1.0));

  // Flat-fitness escape: when the best and the median candidate tie, the
  // selection carries no information and sigma is inflated.
  const int median_idx = gen.ranking[std::min(s.lambda / 2, s.lambda - 1)];
  if (sort_key(gen.fitnesses[gen.ranking[0]]) ==
      sort_key(gen.fitnesses[median_idx]))
    s.sigma *= std::exp(0.2 + s.cs / s.ds);

  s.mean = new_mean;
  ++s.generation;
  refresh_eigensystem(s);
  return gen;
}

int restart_window(int d, int lambda) {
  return 10 + static_cast<int>(
                  std::ceil(30.0 * static_cast<double>(d) / lambda));
}

bool should_restart(const OptimizerState& s, const RestartPolicy& policy,
                    std::span<const double> recent_best) {
  const std::size_t window =
      static_cast<std::size_t>(restart_window(s.dim, s.lambda));
  if (recent_best.size() >= window) {
    auto tail = recent_best.subspan(recent_best.size() - window);
    const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
    if (*hi - *lo < policy.stop_tolfun) return true;
  }
  if (s.sigma * s.eig_scale.maxCoeff() < policy.stop_tolx) return true;
  const double dmin = s.eig_scale.minCoeff();
  const double dmax = s.eig_scale.maxCoeff();
  if (dmin <= 0.0) return true;
  const double cond = (dmax / dmin) * (dmax / dmin);
  return cond > policy.max_condition;
}

Eigen::MatrixXd inverse_sqrt_cov(const OptimizerState& s) {
  const Eigen::MatrixXd sym = 0.5 * (s.cov + s.cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::VectorXd evals = eig.eigenvalues();
  const double floor_val = std::max(evals.maxCoeff(), 1e-300) * 1e-20;
  Eigen::VectorXd inv_sqrt(evals.size());
  for (int i = 0; i < evals.size(); ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(std::max(evals[i], floor_val));
  return eig.eigenvectors() * inv_sqrt.asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace saacm::cma
