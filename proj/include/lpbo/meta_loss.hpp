#pragma once

// Expected running time of the conceptual restart algorithm and its
// estimators. An unsuccessful run costs fe_max evaluations; restarts continue
// until a run succeeds, so with success probability p the number of failed
// runs is geometric with mean (1 - p) / p and
//
//   E[FE] = ((1 - p) / p) * fe_max + E[FE_succ].

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpbo/parallel.hpp"
#include "lpbo/pomdp_env.hpp"
#include "lpbo/problems.hpp"

namespace lpbo {

struct ErtStats {
  int n_runs = 0;
  int n_success = 0;
  double p_hat = 0.0;
  std::optional<double> e_fe_succ_hat;
  long fe_max = 0;
  double expected_fe = 0.0;
};

inline double expected_restarts(double p_s) {
  if (!(p_s > 0.0 && p_s <= 1.0)) throw std::invalid_argument("expected_restarts: p_s must lie in (0, 1]");
  return (1.0 - p_s) / p_s;
}

inline double expected_fe(double p_hat, double e_fe_succ_hat, long fe_max) {
  if (!(p_hat > 0.0 && p_hat <= 1.0))
    throw std::invalid_argument("expected_fe: p_hat must lie in (0, 1]; zero-success runs need the fallback");
  if (!(e_fe_succ_hat >= 0.0)) throw std::invalid_argument("expected_fe: e_fe_succ_hat must be >= 0");
  return expected_restarts(p_hat) * static_cast<double>(fe_max) + e_fe_succ_hat;
}

/// Value used when no run succeeded: the restart formula at p = 1/(2n) with a
/// full-budget success cost, plus fe_max times the mean relative gap left
/// (clipped to [0, 1]) so that two failing optimizers can still be ranked.
/// Always larger than any value reachable with one success out of n.
inline double zero_success_fallback(int n_runs, long fe_max, double mean_relative_gap) {
  const double p = 1.0 / (2.0 * n_runs);
  const double fm = static_cast<double>(fe_max);
  return (1.0 - p) / p * fm + fm + fm * std::clamp(mean_relative_gap, 0.0, 1.0);
}

namespace detail {

inline double relative_gap(const RolloutRecord& r) {
  if (r.best_gap_trajectory.empty()) return 1.0;
  const double initial = r.best_gap_trajectory.front();
  if (!(initial > 0.0)) return 0.0;
  return std::clamp(r.best_gap / initial, 0.0, 1.0);
}

struct RunOutcome {
  std::optional<long> evals_to_success;
  double relative_gap;
};

inline ErtStats estimate_outcomes(const std::vector<RunOutcome>& runs, long fe_max) {
  if (runs.empty()) throw std::invalid_argument("estimate: empty outcome list");
  ErtStats s;
  s.n_runs = static_cast<int>(runs.size());
  s.fe_max = fe_max;
  double succ_evals = 0.0;
  double gap_sum = 0.0;
  for (const auto& r : runs) {
    if (r.evals_to_success) {
      ++s.n_success;
      succ_evals += static_cast<double>(*r.evals_to_success);
    }
    gap_sum += r.relative_gap;
  }
  s.p_hat = static_cast<double>(s.n_success) / s.n_runs;
  if (s.n_success > 0) {
    s.e_fe_succ_hat = succ_evals / s.n_success;
    s.expected_fe = s.n_success == s.n_runs ? *s.e_fe_succ_hat : expected_fe(s.p_hat, *s.e_fe_succ_hat, fe_max);
  } else {
    s.expected_fe = zero_success_fallback(s.n_runs, fe_max, gap_sum / s.n_runs);
  }
  return s;
}

}  // namespace detail

inline ErtStats estimate(const std::vector<RolloutRecord>& outcomes, long fe_max) {
  if (outcomes.empty()) throw std::invalid_argument("estimate: empty outcome list");
  std::vector<detail::RunOutcome> runs;
  for (const auto& r : outcomes) {
    if (r.fe_max != 0 && r.fe_max != fe_max)
      throw std::invalid_argument("estimate: records were produced with a different fe_max");
    runs.push_back({r.success ? r.evals_to_success : std::nullopt, detail::relative_gap(r)});
  }
  return detail::estimate_outcomes(runs, fe_max);
}

/// Same estimator with success redefined as reaching `target` (first-hit times
/// taken from the recorded trajectories).
inline ErtStats estimate_for_target(const std::vector<RolloutRecord>& outcomes, double target, long fe_max) {
  if (outcomes.empty()) throw std::invalid_argument("estimate: empty outcome list");
  std::vector<detail::RunOutcome> runs;
  for (const auto& r : outcomes) runs.push_back({first_hit(r, target), detail::relative_gap(r)});
  return detail::estimate_outcomes(runs, fe_max);
}

/// records[t][r] for task t, run r. Episode seeds depend on (seed, task
/// instance seed, run) only.
inline std::vector<std::vector<RolloutRecord>> run_episodes(const OptimizerFactory& factory,
                                                            const std::vector<Task>& tasks,
                                                            const EpisodeConfig& episode_config, int runs_per_task,
                                                            Seed seed, int workers) {
  if (runs_per_task < 1) throw std::invalid_argument("runs_per_task must be >= 1");
  std::vector<std::vector<RolloutRecord>> out(tasks.size(), std::vector<RolloutRecord>(runs_per_task));
  const std::size_t n = tasks.size() * static_cast<std::size_t>(runs_per_task);
  parallel_for(n, workers, [&](std::size_t k) {
    const std::size_t t = k / runs_per_task;
    const int r = static_cast<int>(k % runs_per_task);
    EpisodeConfig cfg = episode_config;
    cfg.episode_seed = episode_seed_for(seed, tasks[t], r);
    auto opt = factory();
    out[t][static_cast<std::size_t>(r)] = run_episode(*opt, tasks[t], cfg);
  });
  return out;
}

// Mean with a canonical summation order, so permuting the inputs gives a
// bit-identical result.
inline double order_independent_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

inline double meta_fitness_from_records(const std::vector<std::vector<RolloutRecord>>& records) {
  if (records.empty()) throw std::invalid_argument("meta_fitness: empty task list");
  std::vector<double> per_task;
  for (const auto& runs : records) per_task.push_back(estimate(runs, runs.front().fe_max).expected_fe);
  return order_independent_mean(std::move(per_task));
}

/// Mean expected FE over tasks (lower is better).
inline double meta_fitness(const OptimizerFactory& factory, const std::vector<Task>& tasks, int runs_per_task,
                           const EpisodeConfig& episode_config, Seed seed, int workers = 1) {
  if (tasks.empty()) throw std::invalid_argument("meta_fitness: empty task list");
  return meta_fitness_from_records(run_episodes(factory, tasks, episode_config, runs_per_task, seed, workers));
}

}  // namespace lpbo
