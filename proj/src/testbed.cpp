#include "saacm/testbed.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "saacm/rng.hpp"

namespace saacm::testbed {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

using Kind = BenchmarkProblem::Kind;

const std::unordered_map<std::string, Kind>& kind_map() {
  static const std::unordered_map<std::string, Kind> m = {
      {"sphere", Kind::sphere},
      {"ellipsoid", Kind::ellipsoid},
      {"rotated_ellipsoid", Kind::rotated_ellipsoid},
      {"rosenbrock", Kind::rosenbrock},
      {"discus", Kind::discus},
      {"cigar", Kind::cigar},
      {"sharp_ridge", Kind::sharp_ridge},
      {"sum_of_powers", Kind::sum_of_powers},
      {"attractive_sector", Kind::attractive_sector},
      {"rastrigin", Kind::rastrigin},
      {"ackley", Kind::ackley},
      {"schwefel", Kind::schwefel},
  };
  return m;
}

bool uses_rotation(Kind k) {
  switch (k) {
    case Kind::rotated_ellipsoid:
    case Kind::discus:
    case Kind::cigar:
    case Kind::sharp_ridge:
    case Kind::sum_of_powers:
    case Kind::attractive_sector:
      return true;
    default:
      return false;
  }
}

std::uint64_t mix_seed(std::uint64_t seed, Kind kind, int d) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (static_cast<int>(kind) + 1) +
                    0xBF58476D1CE4E5B9ull * static_cast<std::uint64_t>(d);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

double base_value(const BenchmarkProblem& p, const Eigen::VectorXd& z) {
  const int d = p.dim;
  switch (p.kind) {
    case Kind::sphere:
      return z.squaredNorm();
    case Kind::ellipsoid:
    case Kind::rotated_ellipsoid: {
      double v = 0.0;
      for (int i = 0; i < d; ++i)
        v += std::pow(10.0, 6.0 * i / (d - 1)) * z[i] * z[i];
      return v;
    }
    case Kind::rosenbrock: {
      double v = 0.0;
      for (int i = 0; i + 1 < d; ++i) {
        const double a = z[i] + 1.0;
        const double b = z[i + 1] + 1.0;
        v += 100.0 * (a * a - b) * (a * a - b) + (a - 1.0) * (a - 1.0);
      }
      return v;
    }
    case Kind::discus: {
      double v = 1e6 * z[0] * z[0];
      for (int i = 1; i < d; ++i) v += z[i] * z[i];
      return v;
    }
    case Kind::cigar: {
      double v = z[0] * z[0];
      for (int i = 1; i < d; ++i) v += 1e6 * z[i] * z[i];
      return v;
    }
    case Kind::sharp_ridge: {
      double tail = 0.0;
      for (int i = 1; i < d; ++i) tail += z[i] * z[i];
      return z[0] * z[0] + 100.0 * std::sqrt(tail);
    }
    case Kind::sum_of_powers: {
      double v = 0.0;
      for (int i = 0; i < d; ++i)
        v += std::pow(std::abs(z[i]), 2.0 + 4.0 * i / (d - 1));
      return std::sqrt(v);
    }
    case Kind::attractive_sector: {
      double v = 0.0;
      for (int i = 0; i < d; ++i) {
        const double s = (z[i] * p.shift[i] > 0.0) ? 100.0 : 1.0;
        v += s * z[i] * s * z[i];
      }
      return v;
    }
    case Kind::rastrigin: {
      double cossum = 0.0;
      for (int i = 0; i < d; ++i) cossum += std::cos(kTwoPi * z[i]);
      return 10.0 * (d - cossum) + z.squaredNorm();
    }
    case Kind::ackley: {
      const double rms = std::sqrt(z.squaredNorm() / d);
      double cossum = 0.0;
      for (int i = 0; i < d; ++i) cossum += std::cos(kTwoPi * z[i]);
      return 20.0 - 20.0 * std::exp(-0.2 * rms) + std::exp(1.0) -
             std::exp(cossum / d);
    }
    case Kind::schwefel: {
      double v = 0.0;
      double cum = 0.0;
      for (int i = 0; i < d; ++i) {
        cum += z[i];
        v += cum * cum;
      }
      return v;
    }
  }
  return 0.0;
}

}  // namespace

double BenchmarkProblem::operator()(const Eigen::VectorXd& x) const {
  if (x.size() != dim)
    throw std::invalid_argument("BenchmarkProblem: dimension mismatch");
  Eigen::VectorXd z = x - shift;
  if (rotated) z = rotation * z;
  return f_opt + base_value(*this, z);
}

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = {
      "sphere",        "ellipsoid",     "rotated_ellipsoid", "rosenbrock",
      "discus",        "cigar",         "sharp_ridge",       "sum_of_powers",
      "attractive_sector", "rastrigin", "ackley",            "schwefel",
  };
  return names;
}

Eigen::MatrixXd random_rotation(int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

BenchmarkProblem make_problem(const std::string& name, int d,
                              std::uint64_t seed) {
  const auto it = kind_map().find(name);
  if (it == kind_map().end())
    throw std::invalid_argument("make_problem: unknown problem '" + name + "'");
  if (d < 2) throw std::invalid_argument("make_problem: dimension must be >= 2");

  BenchmarkProblem p;
  p.name = name;
  p.kind = it->second;
  p.dim = d;
  p.rotated = uses_rotation(p.kind);
  if (seed == 0) {
    p.rotation = Eigen::MatrixXd::Identity(d, d);
    p.rotated = false;
    // Classic optimum: the ones vector for Rosenbrock, origin otherwise.
    p.shift = p.kind == Kind::rosenbrock ? Eigen::VectorXd::Ones(d)
                                         : Eigen::VectorXd::Zero(d);
    p.f_opt = 0.0;
  } else {
    const std::uint64_t instance = mix_seed(seed, p.kind, d);
    Rng rng(instance);
    p.rotation = p.rotated ? random_rotation(d, rng.derive())
                           : Eigen::MatrixXd::Identity(d, d);
    p.shift = Eigen::VectorXd(d);
    for (int i = 0; i < d; ++i) p.shift[i] = rng.uniform(-4.0, 4.0);
    p.f_opt = rng.uniform(-100.0, 100.0);
  }
  p.target = p.f_opt + 1e-8;
  return p;
}

}  // namespace saacm::testbed
