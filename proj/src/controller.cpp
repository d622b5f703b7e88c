#include "saacm/controller.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace saacm::control {

namespace {

double sort_key(double f) {
  return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
}

SurrogateBuilder ranking_svm_builder() {
  return [](std::span<const ArchiveEntry> window,
            const surrogate::SurrogateHyperParams& hp,
            const surrogate::WhitenTransform& transform)
             -> std::optional<Predictor> {
    std::vector<surrogate::TrainingPoint> points;
    points.reserve(window.size());
    for (const auto& entry : window) points.emplace_back(entry.point, entry.value);
    try {
      auto model = std::make_shared<surrogate::SurrogateModel>(
          surrogate::train_ranking_svm(points, hp, transform));
      return Predictor([model](const Eigen::VectorXd& x) {
        return surrogate::predict(*model, x);
      });
    } catch (const surrogate::NonViableModelError&) {
      return std::nullopt;
    }
  };
}

}  // namespace

HyperRanges hyperparam_ranges(int d) {
  const double n_default =
      40.0 + std::floor(4.0 * std::pow(static_cast<double>(d), 1.7));
  HyperRanges r;
  r.lo << 4.0 * d, 0.0, 0.0, 0.5;
  r.hi << 2.0 * n_default, 10.0, 6.0, 2.0;
  return r;
}

surrogate::SurrogateHyperParams default_hyperparams(int d) {
  if (d < 1)
    throw std::invalid_argument("default_hyperparams: dimension must be >= 1");
  surrogate::SurrogateHyperParams hp;
  hp.n_training = 40 + static_cast<int>(std::floor(
                           4.0 * std::pow(static_cast<double>(d), 1.7)));
  hp.c_base = 6.0;
  hp.c_pow = 3.0;
  hp.c_sigma = 1.0;
  return hp;
}

Eigen::Vector4d normalize_hyperparams(const surrogate::SurrogateHyperParams& hp,
                                      int d) {
  const HyperRanges r = hyperparam_ranges(d);
  Eigen::Vector4d v(static_cast<double>(hp.n_training), hp.c_base, hp.c_pow,
                    hp.c_sigma);
  return (v - r.lo).cwiseQuotient(r.hi - r.lo);
}

surrogate::SurrogateHyperParams denormalize_hyperparams(
    const Eigen::Vector4d& candidate, int d) {
  const HyperRanges r = hyperparam_ranges(d);
  const Eigen::Vector4d c =
      candidate.cwiseMax(0.0).cwiseMin(1.0);
  const Eigen::Vector4d v = r.lo + c.cwiseProduct(r.hi - r.lo);
  surrogate::SurrogateHyperParams hp;
  hp.n_training = static_cast<int>(std::lround(v[0]));
  hp.n_training = std::clamp(hp.n_training, static_cast<int>(r.lo[0]),
                             static_cast<int>(r.hi[0]));
  hp.n_training = std::max(hp.n_training, 2);
  hp.c_base = v[1];
  hp.c_pow = v[2];
  hp.c_sigma = v[3];
  return hp;
}

double measure_surrogate_error(const Predictor& predict,
                               std::span<const ArchiveEntry> test_set) {
  const std::size_t n = test_set.size();
  if (n < 2)
    throw std::invalid_argument(
        "measure_surrogate_error: need at least 2 test points");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sort_key(test_set[a].value) < sort_key(test_set[b].value);
  });
  std::vector<double> predicted(n);
  for (std::size_t i = 0; i < n; ++i)
    predicted[i] = predict(test_set[order[i]].point);
  long violations = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (predicted[i] <= predicted[j]) ++violations;
  return 2.0 * static_cast<double>(violations) /
         (static_cast<double>(n) * static_cast<double>(n - 1));
}

double relax_error(double err, double fresh_err, double beta) {
  return (1.0 - beta) * err + beta * fresh_err;
}

int adjust_lifelength(double err, double tau, int n_max) {
  if (!(tau > 0.0)) return 0;
  const int raw =
      static_cast<int>(std::floor((tau - err) / tau * static_cast<double>(n_max)));
  return std::clamp(raw, 0, n_max);
}

double hyperparam_objective(const Eigen::Vector4d& candidate,
                            std::span<const ArchiveEntry> snapshot,
                            const surrogate::WhitenTransform& transform,
                            std::span<const ArchiveEntry> test_set, int d,
                            const SurrogateBuilder& builder) {
  if (snapshot.empty() || test_set.empty())
    throw std::invalid_argument(
        "hyperparam_objective: empty snapshot or test set");
  const surrogate::SurrogateHyperParams hp =
      denormalize_hyperparams(candidate, d);
  const std::size_t window =
      std::min<std::size_t>(static_cast<std::size_t>(hp.n_training),
                            snapshot.size());
  if (window < 2) return kNonViablePenalty;
  const std::optional<Predictor> model =
      builder(snapshot.last(window), hp, transform);
  if (!model) return kNonViablePenalty;
  return measure_surrogate_error(*model, test_set);
}

RunRecord run(const cma::Objective& objective, int d, long budget,
              const ControllerConfig& config, std::uint64_t seed) {
  if (budget <= 0) throw std::invalid_argument("run: budget must be > 0");
  if (d < 1) throw std::invalid_argument("run: dimension must be >= 1");

  Rng rng(seed);
  RunRecord rec;
  rec.seed = seed;

  const int base_lambda =
      config.lambda > 0 ? config.lambda : cma::default_population(d);
  int lambda_mult = 1;

  auto fresh_optimizer = [&]() {
    Eigen::VectorXd mean(d);
    for (int i = 0; i < d; ++i)
      mean[i] = rng.uniform(-config.init_box, config.init_box);
    return cma::init_cma(d, mean, config.initial_sigma,
                         base_lambda * lambda_mult, rng.derive());
  };
  cma::OptimizerState opt = fresh_optimizer();

  Archive archive;
  double err = 0.5;
  int lifelength = config.fixed_lifelength.value_or(0);
  surrogate::SurrogateHyperParams alpha = default_hyperparams(d);
  if (config.fixed_n_training) alpha.n_training = *config.fixed_n_training;

  const SurrogateBuilder builder =
      config.surrogate_builder ? config.surrogate_builder : ranking_svm_builder();

  std::optional<cma::OptimizerState> hyper;
  auto fresh_hyper = [&]() {
    return cma::init_cma(4, normalize_hyperparams(default_hyperparams(d), d),
                         config.hyper_sigma, config.hyper_population,
                         rng.derive());
  };
  if (config.use_surrogate && config.adapt_hyperparams) hyper = fresh_hyper();

  long evals = 0;
  long g = 0;
  std::vector<double> recent_best;
  bool done = false;

  auto push_trace = [&](bool true_gen) {
    rec.trace.push_back(TraceRow{g, evals, rec.best_value, err, lifelength,
                                 alpha, opt.lambda, true_gen});
  };

  // One generation on the true objective; false when the remaining budget
  // cannot afford it.
  auto true_generation = [&]() -> bool {
    if (evals + opt.lambda > budget) return false;
    const cma::Generation gen = cma::gen_cma(opt, objective);
    evals += opt.lambda;
    ++g;
    for (int k = 0; k < opt.lambda; ++k) {
      archive.push_back(ArchiveEntry{gen.candidates[k], gen.fitnesses[k], g});
      if (std::isfinite(gen.fitnesses[k]) &&
          gen.fitnesses[k] < rec.best_value) {
        rec.best_value = gen.fitnesses[k];
        rec.best_point = gen.candidates[k];
      }
    }
    recent_best.push_back(gen.fitnesses[gen.ranking[0]]);
    push_trace(true);
    if (config.target && rec.best_value <= *config.target) {
      rec.success = true;
      done = true;
    }
    return true;
  };

  auto maybe_restart = [&]() {
    if (!config.ipop_restarts || done) return;
    if (!cma::should_restart(opt, config.restart, recent_best)) return;
    ++rec.restarts;
    lambda_mult *= 2;
    opt = fresh_optimizer();
    err = 0.5;
    lifelength = config.fixed_lifelength.value_or(0);
    recent_best.clear();
  };

  if (!config.use_surrogate) {
    while (!done && true_generation()) maybe_restart();
    rec.evaluations = evals;
    return rec;
  }

  for (int i = 0; i < config.g_start && !done; ++i) {
    if (!true_generation()) break;
    maybe_restart();
  }

  while (!done && evals + opt.lambda <= budget) {
    const surrogate::WhitenTransform transform = surrogate::whiten_transform(opt);
    const std::size_t window = std::min<std::size_t>(
        static_cast<std::size_t>(std::max(alpha.n_training, 2)),
        archive.size());
    const std::optional<Predictor> model =
        builder(std::span<const ArchiveEntry>(archive).last(window), alpha,
                transform);
    const std::size_t snapshot_size = archive.size();

    if (model) {
      const cma::Objective surrogate_objective =
          [&model](const Eigen::VectorXd& x) { return -(*model)(x); };
      for (int i = 0; i < lifelength; ++i) {
        cma::gen_cma(opt, surrogate_objective);
        ++g;
        push_trace(false);
      }
    }

    if (!true_generation()) break;
    const std::span<const ArchiveEntry> batch =
        std::span<const ArchiveEntry>(archive).subspan(snapshot_size);

    if (model) {
      const double fresh = measure_surrogate_error(*model, batch);
      err = relax_error(err, fresh, config.beta_err);
      lifelength = config.fixed_lifelength
                       ? *config.fixed_lifelength
                       : adjust_lifelength(err, config.tau_err,
                                           config.lifelength_max);
    }

    if (hyper && !done) {
      const std::span<const ArchiveEntry> snapshot(archive.data(),
                                                   snapshot_size);
      const cma::Objective hyper_objective = [&](const Eigen::VectorXd& c) {
        return hyperparam_objective(Eigen::Vector4d(c), snapshot, transform,
                                    batch, d, builder);
      };
      const cma::Generation hgen = cma::gen_cma(*hyper, hyper_objective);
      bool all_penalized = true;
      for (double f : hgen.fitnesses)
        all_penalized = all_penalized && f == kNonViablePenalty;
      if (all_penalized) {
        alpha = default_hyperparams(d);
        hyper = fresh_hyper();
      } else {
        alpha = denormalize_hyperparams(Eigen::Vector4d(hyper->mean), d);
      }
    }

    maybe_restart();
  }

  rec.evaluations = evals;
  return rec;
}

}  // namespace saacm::control
