#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace saacm::testbed {

// A benchmark objective with optional orthogonal rotation and optimum
// shift. Evaluation is pure; instances are immutable after construction
// and safe to evaluate concurrently.
struct BenchmarkProblem {
  enum class Kind {
    sphere,
    ellipsoid,
    rotated_ellipsoid,
    rosenbrock,
    discus,
    cigar,
    sharp_ridge,
    sum_of_powers,
    attractive_sector,
    rastrigin,
    ackley,
    schwefel,
  };

  std::string name;
  Kind kind = Kind::sphere;
  int dim = 0;
  bool rotated = false;
  Eigen::MatrixXd rotation;  // R, orthogonal; identity when !rotated
  Eigen::VectorXd shift;     // x_opt
  double f_opt = 0.0;
  double target = 1e-8;  // f_opt + 1e-8

  double operator()(const Eigen::VectorXd& x) const;
};

// Names accepted by make_problem.
const std::vector<std::string>& problem_names();

// Seeded problem instance. seed == 0 gives the canonical instance
// (identity rotation, classic optimum location, f_opt = 0); any other
// seed draws a random orthogonal rotation (where the function family is
// rotated), a uniform shift in [-4,4]^d and an f_opt offset in
// [-100,100]. Throws std::invalid_argument for unknown names or d < 2.
BenchmarkProblem make_problem(const std::string& name, int d,
                              std::uint64_t seed);

// Seeded random orthogonal matrix (QR of a Gaussian matrix,
// sign-corrected).
Eigen::MatrixXd random_rotation(int d, std::uint64_t seed);

}  // namespace saacm::testbed
