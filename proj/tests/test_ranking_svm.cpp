#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "saacm/ranking_svm.hpp"
#include "saacm/rng.hpp"

using namespace saacm;
using surrogate::TrainingPoint;
using surrogate::WhitenTransform;

namespace {

WhitenTransform identity_transform(int d) {
  return WhitenTransform{Eigen::MatrixXd::Identity(d, d),
                         Eigen::VectorXd::Zero(d)};
}

Eigen::MatrixXd spd_inverse_sqrt(const Eigen::MatrixXd& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  return eig.eigenvectors() *
         eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

// Exhaustive active-set oracle for
//   max sum(a) - 0.5 a^T G a,  0 <= a_i <= C_i,
// valid for small m: every face's stationary point is enumerated and the
// best feasible one returned.
double brute_force_box_qp(const Eigen::MatrixXd& g, const Eigen::VectorXd& c) {
  const int m = static_cast<int>(g.rows());
  double best = 0.0;  // a = 0 is always feasible
  std::vector<int> pattern(m);  // 0 lower, 1 upper, 2 free
  const int total = static_cast<int>(std::pow(3, m));
  for (int code = 0; code < total; ++code) {
    int rest = code;
    for (int i = 0; i < m; ++i) {
      pattern[i] = rest % 3;
      rest /= 3;
    }
    std::vector<int> free_idx;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
      if (pattern[i] == 1) a[i] = c[i];
      if (pattern[i] == 2) free_idx.push_back(i);
    }
    if (!free_idx.empty()) {
      const int k = static_cast<int>(free_idx.size());
      Eigen::MatrixXd gff(k, k);
      Eigen::VectorXd rhs(k);
      for (int r = 0; r < k; ++r) {
        rhs[r] = 1.0;
        for (int i = 0; i < m; ++i)
          if (pattern[i] == 1) rhs[r] -= g(free_idx[r], i) * a[i];
        for (int s = 0; s < k; ++s) gff(r, s) = g(free_idx[r], free_idx[s]);
      }
      const Eigen::VectorXd af = gff.fullPivLu().solve(rhs);
      if ((gff * af - rhs).norm() > 1e-9 * std::max(1.0, rhs.norm())) continue;
      bool ok = true;
      for (int r = 0; r < k; ++r) {
        if (!(af[r] >= -1e-12 && af[r] <= c[free_idx[r]] + 1e-12)) ok = false;
        a[free_idx[r]] = af[r];
      }
      if (!ok) continue;
    }
    best = std::max(best, a.sum() - 0.5 * a.dot(g * a));
  }
  return best;
}

}  // namespace

TEST_CASE("whiten") {
  WhitenTransform t = identity_transform(2);
  CHECK(surrogate::whiten(Eigen::Vector2d(3.0, 4.0), t)
            .isApprox(Eigen::Vector2d(3.0, 4.0)));

  t.center = Eigen::Vector2d(1.0, -2.0);
  CHECK(surrogate::whiten(t.center, t).isZero());

  // C = diag(4, 1): C^{-1/2} = diag(1/2, 1).
  WhitenTransform diag{Eigen::Vector2d(0.5, 1.0).asDiagonal().toDenseMatrix(),
                       Eigen::Vector2d::Zero()};
  CHECK(surrogate::whiten(Eigen::Vector2d(2.0, 2.0), diag)
            .isApprox(Eigen::Vector2d(1.0, 2.0)));

  CHECK_THROWS_AS(surrogate::whiten(Eigen::Vector3d::Zero(), t),
                  std::invalid_argument);
}

TEST_CASE("kernel") {
  const Eigen::Vector2d u(0.0, 0.0);
  CHECK(surrogate::kernel(u, u, 1.7) == 1.0);
  CHECK(surrogate::kernel(u, Eigen::Vector2d(1.0, 0.0), 1.0) ==
        doctest::Approx(0.6065306597126334).epsilon(1e-12));
  double prev = 1.0;
  for (double dist = 0.5; dist < 30.0; dist += 0.5) {
    const double k = surrogate::kernel(u, Eigen::Vector2d(dist, 0.0), 1.0);
    CHECK(k < prev);
    CHECK(k > 0.0);
    CHECK(k <= 1.0);
    prev = k;
  }
  CHECK_THROWS_AS(surrogate::kernel(u, u, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(surrogate::kernel(u, Eigen::Vector3d::Zero(), 1.0),
                  std::invalid_argument);
}

TEST_CASE("kernel_width") {
  using V = Eigen::VectorXd;
  std::vector<V> two = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.0, 2.0)};
  CHECK(surrogate::kernel_width(two, 1.0) == doctest::Approx(2.0));

  std::vector<V> three = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 0.0),
                          Eigen::Vector2d(2.0, 0.0)};
  CHECK(surrogate::kernel_width(three, 1.0) == doctest::Approx(4.0 / 3.0));

  std::vector<V> same = {Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(1.0, 1.0)};
  CHECK(surrogate::kernel_width(same, 1.0) == 1.0);

  std::vector<V> one = {Eigen::Vector2d(0.0, 0.0)};
  CHECK_THROWS_AS(surrogate::kernel_width(one, 1.0), std::invalid_argument);
}

TEST_CASE("violation_costs") {
  const auto c = surrogate::violation_costs(5, 6.0, 3.0);
  REQUIRE(c.size() == 4);
  CHECK(c[0] == doctest::Approx(6.4e7));
  CHECK(c[3] == doctest::Approx(1e6));
  for (int i = 0; i + 1 < 4; ++i) CHECK(c[i] > c[i + 1]);

  const auto flat = surrogate::violation_costs(5, 6.0, 0.0);
  for (int i = 0; i < 4; ++i) CHECK(flat[i] == doctest::Approx(1e6));
}

TEST_CASE("two-point training solves the one-variable dual analytically") {
  std::vector<TrainingPoint> pts = {{Eigen::Vector2d(0.0, 0.0), 1.0},
                                    {Eigen::Vector2d(1.0, 0.0), 2.0}};
  surrogate::SurrogateHyperParams hp;
  hp.n_training = 2;
  hp.c_sigma = 1.0;

  // Interior optimum: huge box.
  hp.c_base = 6.0;
  hp.c_pow = 0.0;
  auto model = surrogate::train_ranking_svm(pts, hp, identity_transform(2));
  const double k12 = surrogate::kernel(Eigen::Vector2d(0.0, 0.0),
                                       Eigen::Vector2d(1.0, 0.0),
                                       model.sigma_k);
  const double g11 = 2.0 - 2.0 * k12;
  CHECK(model.multipliers[0] == doctest::Approx(1.0 / g11).epsilon(1e-7));

  // Clipped optimum: tiny box.
  hp.c_base = -2.0;
  auto clipped = surrogate::train_ranking_svm(pts, hp, identity_transform(2));
  CHECK(clipped.multipliers[0] == doctest::Approx(1e-2));
}

TEST_CASE("1-D monotone data trains to zero error and decreasing predictions") {
  std::vector<TrainingPoint> pts;
  for (int i = 1; i <= 5; ++i)
    pts.push_back({Eigen::VectorXd::Constant(1, double(i)), double(i)});
  surrogate::SurrogateHyperParams hp;
  hp.n_training = 5;
  auto model = surrogate::train_ranking_svm(pts, hp, identity_transform(1));
  CHECK(model.train_error == 0.0);
  double prev = surrogate::predict(model, Eigen::VectorXd::Constant(1, 1.0));
  for (int i = 2; i <= 5; ++i) {
    const double v =
        surrogate::predict(model, Eigen::VectorXd::Constant(1, double(i)));
    CHECK(v < prev);
    prev = v;
  }
  // Zero multipliers would mean a constant surrogate.
  CHECK(model.multipliers.maxCoeff() > 0.0);
}

TEST_CASE("training constraints hold with unit margin at the dual optimum") {
  // The margin of constraint i equals (G alpha)_i, so at KKT convergence an
  // interior multiplier certifies margin 1 and a zero multiplier margin >= 1.
  // Capped (non-converged) solves carry no such guarantee and are skipped.
  Rng rng(31);
  int converged_instances = 0;
  for (int inst = 0; inst < 8; ++inst) {
    std::vector<TrainingPoint> pts;
    const int n = 6 + inst;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x(3);
      for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-2.0, 2.0);
      pts.push_back({x, x.squaredNorm()});
    }
    surrogate::SurrogateHyperParams hp;
    hp.n_training = n;
    hp.c_base = 2.0;
    auto model = surrogate::train_ranking_svm(pts, hp, identity_transform(3));
    if (!model.converged) continue;
    ++converged_instances;
    for (int i = 0; i + 1 < n; ++i) {
      const double a = surrogate::predict(
          model, Eigen::VectorXd(model.points.row(i).transpose()));
      const double b = surrogate::predict(
          model, Eigen::VectorXd(model.points.row(i + 1).transpose()));
      if (model.multipliers[i] < model.costs[i] * (1.0 - 1e-9))
        CHECK(a - b >= 1.0 - 1e-5);
    }
  }
  CHECK(converged_instances > 0);
}

TEST_CASE("duplicate points with distinct values are non-viable") {
  std::vector<TrainingPoint> pts = {{Eigen::Vector2d(1.0, 1.0), 1.0},
                                    {Eigen::Vector2d(1.0, 1.0), 2.0},
                                    {Eigen::Vector2d(1.0, 1.0), 3.0}};
  surrogate::SurrogateHyperParams hp;
  hp.n_training = 3;
  CHECK_THROWS_AS(surrogate::train_ranking_svm(pts, hp, identity_transform(2)),
                  surrogate::NonViableModelError);
}

TEST_CASE("fewer than two points is an argument error") {
  std::vector<TrainingPoint> pts = {{Eigen::Vector2d(0.0, 0.0), 1.0}};
  surrogate::SurrogateHyperParams hp;
  CHECK_THROWS_AS(surrogate::train_ranking_svm(pts, hp, identity_transform(2)),
                  std::invalid_argument);
}

TEST_CASE("monotone transform of training values leaves the model identical") {
  Rng rng(13);
  std::vector<TrainingPoint> a, b;
  for (int i = 0; i < 15; ++i) {
    Eigen::VectorXd x(2);
    x << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
    const double f = x.squaredNorm();
    a.push_back({x, f});
    b.push_back({x, 2.0 * f + 3.0});
  }
  surrogate::SurrogateHyperParams hp;
  hp.n_training = 15;
  const auto ma = surrogate::train_ranking_svm(a, hp, identity_transform(2));
  const auto mb = surrogate::train_ranking_svm(b, hp, identity_transform(2));
  CHECK((ma.multipliers.array() == mb.multipliers.array()).all());
  CHECK(ma.sigma_k == mb.sigma_k);
  CHECK((ma.points.array() == mb.points.array()).all());
}

TEST_CASE("rotation equivariance of training and prediction") {
  const int d = 4;
  Rng rng(47);

  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  const Eigen::MatrixXd cov =
      a * a.transpose() + 0.3 * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd mean(d);
  for (int i = 0; i < d; ++i) mean[i] = rng.uniform(-1.0, 1.0);

  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(d, 0.4, 1.0).normalized();
  const Eigen::MatrixXd rot =
      Eigen::MatrixXd::Identity(d, d) - 2.0 * v * v.transpose();

  std::vector<TrainingPoint> plain, rotated;
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x[j] = mean[j] + rng.normal();
    const double f = (x - mean).squaredNorm() + 0.1 * x[0];
    plain.push_back({x, f});
    rotated.push_back({rot.transpose() * x, f});
  }

  const WhitenTransform t1{spd_inverse_sqrt(cov), mean};
  const WhitenTransform t2{spd_inverse_sqrt(rot.transpose() * cov * rot),
                           rot.transpose() * mean};

  surrogate::SurrogateHyperParams hp;
  hp.n_training = 20;
  const auto m1 = surrogate::train_ranking_svm(plain, hp, t1);
  const auto m2 = surrogate::train_ranking_svm(rotated, hp, t2);

  for (int trial = 0; trial < 25; ++trial) {
    Eigen::VectorXd y(d);
    for (int j = 0; j < d; ++j) y[j] = rng.uniform(-2.0, 2.0);
    const double p1 = surrogate::predict(m1, y);
    const double p2 = surrogate::predict(m2, rot.transpose() * y);
    CHECK(std::abs(p1 - p2) <= 1e-6 * std::max(1.0, std::abs(p1)));
  }
}

TEST_CASE("dual feasibility and monotone sweep objectives") {
  Rng rng(111);
  for (int inst = 0; inst < 10; ++inst) {
    std::vector<TrainingPoint> pts;
    const int n = 5 + inst;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x(3);
      for (int j = 0; j < 3; ++j) x[j] = rng.normal();
      pts.push_back({x, rng.normal()});
    }
    surrogate::SurrogateHyperParams hp;
    hp.n_training = n;
    hp.c_base = rng.uniform(-2.0, 2.0);
    hp.c_pow = rng.uniform(0.0, 3.0);
    const auto m = surrogate::train_ranking_svm(pts, hp, identity_transform(3));
    for (int i = 0; i + 1 < n; ++i) {
      CHECK(m.multipliers[i] >= 0.0);
      CHECK(m.multipliers[i] <= m.costs[i]);
    }
    for (std::size_t s = 1; s < m.sweep_objectives.size(); ++s) {
      const double scale =
          std::max(1.0, std::abs(m.sweep_objectives[s - 1]));
      CHECK(m.sweep_objectives[s] >=
            m.sweep_objectives[s - 1] - 1e-12 * scale);
    }
  }
}

TEST_CASE("coordinate ascent matches the brute-force QP oracle") {
  Rng rng(211);
  for (int inst = 0; inst < 30; ++inst) {
    const int n = 2 + static_cast<int>(rng.uniform() * 3.0);  // 2..4 points
    const int m = n - 1;
    // Linear-kernel Gram of consecutive differences.
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) x(i, j) = rng.uniform(-2.0, 2.0);
    Eigen::MatrixXd diff(m, 2);
    for (int i = 0; i < m; ++i) diff.row(i) = x.row(i) - x.row(i + 1);
    const Eigen::MatrixXd gram = diff * diff.transpose();
    Eigen::VectorXd costs(m);
    for (int i = 0; i < m; ++i)
      costs[i] = std::pow(10.0, rng.uniform(-1.0, 2.0));

    const auto sol = surrogate::solve_ranking_dual(gram, costs, 1000L * n);
    const double ours = sol.alpha.sum() - 0.5 * sol.alpha.dot(gram * sol.alpha);
    const double oracle = brute_force_box_qp(gram, costs);
    CHECK(ours == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(ours <= oracle + 1e-9 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("zero multipliers predict the zero function") {
  surrogate::SurrogateModel model;
  model.transform = identity_transform(2);
  model.points = Eigen::MatrixXd::Random(4, 2);
  model.multipliers = Eigen::VectorXd::Zero(3);
  model.costs = Eigen::VectorXd::Ones(3);
  model.sigma_k = 1.0;
  CHECK(surrogate::predict(model, Eigen::Vector2d(0.3, -0.8)) == 0.0);
  CHECK_THROWS_AS(surrogate::predict(model, Eigen::Vector3d::Zero()),
                  std::invalid_argument);
}
