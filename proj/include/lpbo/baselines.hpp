#pragma once

// Reference optimizers behind the same Optimizer interface: batch random
// search and a (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation,
// rank-one and rank-mu covariance updates (default constants from Hansen's
// tutorial). Samples are clamped to [-1, 1] for evaluation, but the update uses
// the unclamped values.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lpbo/pomdp_env.hpp"
#include "lpbo/rng.hpp"

namespace lpbo {

inline ActionBatch random_search_act(int lambda, int dimension, Seed seed, int generation) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(generation)));
  ActionBatch a{Eigen::MatrixXd(lambda, dimension)};
  for (int i = 0; i < lambda; ++i)
    for (int j = 0; j < dimension; ++j) a.points(i, j) = rng.uniform(-1.0, 1.0);
  return a;
}

class RandomSearch : public Optimizer {
 public:
  void reset(int lambda, int dimension, Seed seed) override {
    lambda_ = lambda;
    dimension_ = dimension;
    seed_ = seed;
  }
  ActionBatch act(const Observation& obs) override {
    return random_search_act(lambda_, dimension_, seed_, obs.generation);
  }

 private:
  int lambda_ = 0;
  int dimension_ = 0;
  Seed seed_ = 0;
};

inline int cma_default_lambda(int dimension) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dimension))));
}

struct CmaState {
  int dimension = 0;
  int lambda = 0;
  int mu = 0;
  Eigen::VectorXd weights;  // length mu, sums to 1
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;

  Eigen::VectorXd mean;
  double step_size = 0.3;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_c;
  int generation = 0;

  // Eigendecomposition of the covariance: C = B diag(D^2) B^T.
  Eigen::MatrixXd basis;
  Eigen::VectorXd axis_lengths;

  static CmaState initial(int dimension, int lambda, double step_size = 0.3) {
    if (dimension < 1) throw std::invalid_argument("cma: dimension must be >= 1");
    if (lambda < 2) throw std::invalid_argument("cma: lambda must be >= 2");
    CmaState s;
    const double n = dimension;
    s.dimension = dimension;
    s.lambda = lambda;
    s.mu = lambda / 2;
    s.weights.resize(s.mu);
    for (int i = 0; i < s.mu; ++i) s.weights(i) = std::log(s.mu + 0.5) - std::log(i + 1.0);
    s.weights /= s.weights.sum();
    s.mu_eff = 1.0 / s.weights.squaredNorm();
    s.c_sigma = (s.mu_eff + 2.0) / (n + s.mu_eff + 5.0);
    s.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (n + 1.0)) - 1.0) + s.c_sigma;
    s.c_c = (4.0 + s.mu_eff / n) / (n + 4.0 + 2.0 * s.mu_eff / n);
    s.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + s.mu_eff);
    s.c_mu = std::min(1.0 - s.c_1, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) / ((n + 2.0) * (n + 2.0) + s.mu_eff));
    s.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
    s.mean = Eigen::VectorXd::Zero(dimension);
    s.step_size = step_size;
    s.covariance = Eigen::MatrixXd::Identity(dimension, dimension);
    s.path_sigma = Eigen::VectorXd::Zero(dimension);
    s.path_c = Eigen::VectorXd::Zero(dimension);
    s.basis = Eigen::MatrixXd::Identity(dimension, dimension);
    s.axis_lengths = Eigen::VectorXd::Ones(dimension);
    return s;
  }
};

namespace detail {

// Symmetrizes C and refreshes (B, D). Eigenvalues at or below zero are floored
// at 1e-14 * trace(C) and the decomposition retried once.
inline void refresh_eigensystem(CmaState& s) {
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.covariance);
    const double floor = 1e-14 * std::max(s.covariance.trace(), 1e-300);
    if (es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0 && es.eigenvalues().allFinite()) {
      s.basis = es.eigenvectors();
      s.axis_lengths = es.eigenvalues().cwiseSqrt();
      return;
    }
    if (attempt == 1 || es.info() != Eigen::Success || !es.eigenvalues().allFinite())
      throw std::runtime_error("cma: covariance factorization failed");
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
    s.covariance = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();
  }
}

}  // namespace detail

struct CmaSample {
  ActionBatch action;         // clamped
  Eigen::MatrixXd unclamped;  // lambda x d
};

inline CmaSample cma_act(CmaState& state, int lambda, Seed seed) {
  if (state.basis.rows() != state.dimension) detail::refresh_eigensystem(state);
  Rng rng(seed);
  CmaSample out;
  out.unclamped.resize(lambda, state.dimension);
  const Eigen::MatrixXd transform = state.basis * state.axis_lengths.asDiagonal();
  Eigen::VectorXd z(state.dimension);
  for (int i = 0; i < lambda; ++i) {
    for (int j = 0; j < state.dimension; ++j) z(j) = rng.normal();
    out.unclamped.row(i) = (state.mean + state.step_size * (transform * z)).transpose();
  }
  out.action.points = out.unclamped.cwiseMax(-1.0).cwiseMin(1.0);
  return out;
}

inline CmaState cma_update(CmaState state, const Eigen::MatrixXd& samples, const Eigen::VectorXd& fitness) {
  const int n = state.dimension;
  const int lambda = static_cast<int>(samples.rows());
  if (samples.cols() != n || fitness.size() != lambda)
    throw std::invalid_argument("cma_update: sample and fitness shapes do not match");
  if (lambda != state.lambda) throw std::invalid_argument("cma_update: sample count differs from state lambda");
  if (!fitness.allFinite()) throw std::invalid_argument("cma_update: non-finite fitness");

  std::vector<int> order(static_cast<std::size_t>(lambda));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fitness(a) < fitness(b); });

  const Eigen::VectorXd old_mean = state.mean;
  Eigen::MatrixXd y(n, state.mu);
  for (int k = 0; k < state.mu; ++k)
    y.col(k) = (samples.row(order[static_cast<std::size_t>(k)]).transpose() - old_mean) / state.step_size;
  const Eigen::VectorXd y_w = y * state.weights;
  state.mean = old_mean + state.step_size * y_w;

  // C^{-1/2} y_w = B D^{-1} B^T y_w
  const Eigen::VectorXd inv_sqrt_y =
      state.basis * (state.basis.transpose() * y_w).cwiseQuotient(state.axis_lengths);
  state.path_sigma = (1.0 - state.c_sigma) * state.path_sigma +
                     std::sqrt(state.c_sigma * (2.0 - state.c_sigma) * state.mu_eff) * inv_sqrt_y;
  const double ps_norm = state.path_sigma.norm();
  const double decay = 1.0 - std::pow(1.0 - state.c_sigma, 2.0 * (state.generation + 1));
  const bool h_sigma = ps_norm / std::sqrt(decay) < (1.4 + 2.0 / (n + 1.0)) * state.chi_n;
  state.path_c = (1.0 - state.c_c) * state.path_c +
                 (h_sigma ? std::sqrt(state.c_c * (2.0 - state.c_c) * state.mu_eff) : 0.0) * y_w;

  const double delta = h_sigma ? 0.0 : state.c_c * (2.0 - state.c_c);
  Eigen::MatrixXd rank_mu = y * state.weights.asDiagonal() * y.transpose();
  state.covariance = (1.0 - state.c_1 - state.c_mu + state.c_1 * delta) * state.covariance +
                     state.c_1 * state.path_c * state.path_c.transpose() + state.c_mu * rank_mu;

  state.step_size *= std::exp((state.c_sigma / state.d_sigma) * (ps_norm / state.chi_n - 1.0));
  ++state.generation;
  detail::refresh_eigensystem(state);
  return state;
}

/// Ranking fitness for clamped evaluation: f plus a quadratic penalty on the
/// squared distance each unclamped sample lies outside the box. The weight
/// makes one step-size of excess cost one inter-quartile range of f, so the
/// mean is pulled back when it drifts outside and the penalty vanishes inside.
inline Eigen::VectorXd boundary_penalized(const CmaState& state, const Eigen::MatrixXd& samples,
                                          const Eigen::VectorXd& fitness) {
  const Eigen::VectorXd excess =
      (samples - samples.cwiseMax(-1.0).cwiseMin(1.0)).rowwise().squaredNorm();
  if (excess.maxCoeff() == 0.0) return fitness;
  std::vector<double> sorted(fitness.data(), fitness.data() + fitness.size());
  std::sort(sorted.begin(), sorted.end());
  const auto q = [&](double frac) { return sorted[static_cast<std::size_t>(frac * (sorted.size() - 1) + 0.5)]; };
  const double spread = std::max(q(0.75) - q(0.25), 1e-12 * (1.0 + std::abs(q(0.5))));
  const double scale = state.step_size * state.step_size * state.covariance.trace() / state.dimension;
  const double weight = spread / std::max(scale, 1e-300);
  return fitness + weight * excess;
}

/// CMA-ES behind the Optimizer interface. Uses the episode's lambda; pick
/// cma_default_lambda(d) in the episode config for the textbook setting.
class CmaEs : public Optimizer {
 public:
  explicit CmaEs(double initial_step_size = 0.3) : initial_step_size_(initial_step_size) {}

  void reset(int lambda, int dimension, Seed seed) override {
    state_ = CmaState::initial(dimension, lambda, initial_step_size_);
    seed_ = seed;
    pending_.resize(0, 0);
  }

  ActionBatch act(const Observation& obs) override {
    if (!obs.empty()) {
      if (pending_.rows() != obs.prev_fitness.size())
        throw std::invalid_argument("cma: observation does not match the last proposed batch");
      state_ = cma_update(std::move(state_), pending_, boundary_penalized(state_, pending_, obs.prev_fitness));
    }
    auto sample = cma_act(state_, state_.lambda, derive_seed(seed_, static_cast<std::uint64_t>(obs.generation)));
    pending_ = std::move(sample.unclamped);
    return std::move(sample.action);
  }

  const CmaState& state() const { return state_; }

 private:
  double initial_step_size_;
  CmaState state_;
  Seed seed_ = 0;
  Eigen::MatrixXd pending_;
};

inline OptimizerFactory random_search_factory() {
  return [] { return std::make_unique<RandomSearch>(); };
}

inline OptimizerFactory cma_es_factory(double initial_step_size = 0.3) {
  return [initial_step_size] { return std::make_unique<CmaEs>(initial_step_size); };
}

}  // namespace lpbo
