#pragma once

// Inner loop of the learning-to-optimize POMDP. One POMDP step is one
// generation: the optimizer proposes lambda points, the hidden task scores
// them, and the optimizer observes only (points, fitness values, generation).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpbo/format.hpp"
#include "lpbo/problems.hpp"
#include "lpbo/rng.hpp"

namespace lpbo {

struct Observation {
  Eigen::MatrixXd prev_points;   // lambda x d, empty at generation 0
  Eigen::VectorXd prev_fitness;  // length lambda, empty at generation 0
  int generation = 0;

  bool empty() const { return prev_fitness.size() == 0; }
};

struct ActionBatch {
  Eigen::MatrixXd points;  // one row per individual
};

struct EpisodeConfig {
  int lambda = 10;
  long fe_max = 0;  // 0 means 100 * d
  double tolerance = 1e-3;
  Seed episode_seed = 0;

  long resolved_fe_max(int dimension) const { return fe_max > 0 ? fe_max : 100L * dimension; }
};

struct RolloutRecord {
  long evals_used = 0;
  bool success = false;
  std::optional<long> evals_to_success;
  double best_gap = std::numeric_limits<double>::infinity();
  std::vector<double> best_gap_trajectory;  // after each generation
  std::vector<long> evals_trajectory;       // cumulative evaluations after each generation
  std::vector<double> rewards;              // per generation; 0 at generation 0
  Seed episode_seed = 0;
  long fe_max = 0;
};

/// The only surface an optimizer sees. Implementations are single-owner per
/// episode; reset() must fully reinitialize internal state.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void reset(int lambda, int dimension, Seed seed) = 0;
  virtual ActionBatch act(const Observation& obs) = 0;
};

using OptimizerFactory = std::function<std::unique_ptr<Optimizer>()>;

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(int generation, const std::string& what)
      : std::runtime_error("optimizer protocol error at generation " + std::to_string(generation) + ": " + what),
        generation_(generation) {}
  int generation() const { return generation_; }

 private:
  int generation_;
};

inline Observation next_observation(const ActionBatch& prev_action, const Eigen::VectorXd& fitness, int generation) {
  Observation o;
  o.generation = generation;
  if (generation == 0 || fitness.size() == 0) return o;
  o.prev_points = prev_action.points;
  o.prev_fitness = fitness;
  return o;
}

inline double reward(double prev_best_gap, double new_best_gap) { return prev_best_gap - new_best_gap; }

struct TraceRow {
  int generation;
  int point_index;
  std::vector<double> x;
  double fitness;
};

struct EpisodeTrace {
  std::vector<TraceRow> rows;

  void write_csv(std::ostream& os, int dimension) const {
    os << "generation,point_index";
    for (int j = 0; j < dimension; ++j) os << ",x_" << j;
    os << ",fitness\n";
    for (const auto& r : rows) {
      os << r.generation << ',' << r.point_index;
      for (double v : r.x) os << ',' << format_double(v);
      os << ',' << format_double(r.fitness) << '\n';
    }
  }
};

/// Runs one episode to budget exhaustion. Success freezes evals_to_success at
/// the end of the first generation whose best gap is within tolerance; the
/// episode still runs on so trajectories always cover the full budget. The
/// final generation is truncated to the remaining budget.
inline RolloutRecord run_episode(Optimizer& optimizer, const Task& task, const EpisodeConfig& config,
                                 EpisodeTrace* trace = nullptr) {
  const int lambda = config.lambda;
  const int d = task.dimension;
  const long fe_max = config.resolved_fe_max(d);
  if (lambda < 1) throw std::invalid_argument("run_episode: lambda must be >= 1");
  if (fe_max < lambda) throw std::invalid_argument("run_episode: fe_max must be >= lambda");

  RolloutRecord rec;
  rec.episode_seed = config.episode_seed;
  rec.fe_max = fe_max;

  optimizer.reset(lambda, d, config.episode_seed);
  Observation obs;
  const double f_star = task.optimum_value;

  for (int g = 0; rec.evals_used < fe_max; ++g) {
    ActionBatch action = optimizer.act(obs);
    if (action.points.rows() != lambda || action.points.cols() != d)
      throw ProtocolError(g, "expected " + std::to_string(lambda) + "x" + std::to_string(d) + " action, got " +
                                 std::to_string(action.points.rows()) + "x" + std::to_string(action.points.cols()));
    if (!action.points.allFinite()) throw ProtocolError(g, "non-finite coordinate in action");
    action.points = action.points.cwiseMax(-1.0).cwiseMin(1.0);

    const long n_eval = std::min<long>(lambda, fe_max - rec.evals_used);
    Eigen::VectorXd fitness(n_eval);
    const double prev_best = rec.best_gap;
    for (long i = 0; i < n_eval; ++i) {
      const Eigen::VectorXd x = action.points.row(i).transpose();
      fitness(i) = evaluate(task, x);
      rec.best_gap = std::min(rec.best_gap, std::max(0.0, fitness(i) - f_star));
      if (trace) trace->rows.push_back({g, static_cast<int>(i), std::vector<double>(x.data(), x.data() + d), fitness(i)});
    }
    rec.evals_used += n_eval;
    rec.rewards.push_back(g == 0 ? 0.0 : reward(prev_best, rec.best_gap));
    rec.best_gap_trajectory.push_back(rec.best_gap);
    rec.evals_trajectory.push_back(rec.evals_used);
    if (!rec.success && rec.best_gap <= config.tolerance) {
      rec.success = true;
      rec.evals_to_success = rec.evals_used;
    }
    obs = next_observation(action, fitness, g + 1);
  }
  return rec;
}

/// First cumulative evaluation count at which the best gap reached `target`.
inline std::optional<long> first_hit(const RolloutRecord& rec, double target) {
  for (std::size_t g = 0; g < rec.best_gap_trajectory.size(); ++g)
    if (rec.best_gap_trajectory[g] <= target) return rec.evals_trajectory[g];
  return std::nullopt;
}

/// Episode seed for (task, run) under a meta-level seed. Keyed by the task's
/// instance seed rather than its list position so results do not depend on
/// task order.
inline Seed episode_seed_for(Seed block_seed, const Task& task, int run) {
  return derive_seed(block_seed, task.config.instance_seed, static_cast<std::uint64_t>(run));
}

}  // namespace lpbo
