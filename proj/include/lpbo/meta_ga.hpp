#pragma once

// Outer loop: a mutation-only genetic algorithm over policy parameters where
// each individual is stored as a list of seeds (an init seed plus one
// (seed, sigma) pair per inherited mutation). Truncation selection, elitism,
// and a geometrically decaying mutation strength floored at sigma_min.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpbo/meta_loss.hpp"
#include "lpbo/parallel.hpp"
#include "lpbo/policy.hpp"
#include "lpbo/problems.hpp"
#include "lpbo/rng.hpp"

namespace lpbo {

struct Mutation {
  Seed seed = 0;
  double sigma = 0.0;

  bool operator==(const Mutation&) const = default;
};

struct Genome {
  Seed init_seed = 0;
  std::vector<Mutation> mutations;

  bool operator==(const Genome&) const = default;
};

struct GaConfig {
  int population_size = 512;
  int n_elites = 5;
  int n_parents = 20;
  double sigma0 = 0.3;
  double sigma_decay = 0.95;
  double sigma_min = 0.01;
  int generations = 200;
  // Reuse one episode-seed block for every generation (noise-free fitness).
  bool fixed_episode_seeds = false;

  void validate() const {
    if (population_size < 1) throw std::invalid_argument("ga.population_size must be >= 1");
    if (n_elites < 1) throw std::invalid_argument("ga.n_elites must be >= 1");
    if (n_parents < 1) throw std::invalid_argument("ga.n_parents must be >= 1");
    if (n_elites > n_parents) throw std::invalid_argument("ga.n_elites must be <= ga.n_parents");
    if (n_parents > population_size) throw std::invalid_argument("ga.n_parents must be <= ga.population_size");
    if (!(sigma0 > 0.0)) throw std::invalid_argument("ga.sigma0 must be > 0");
    if (!(sigma_decay > 0.0 && sigma_decay <= 1.0)) throw std::invalid_argument("ga.sigma_decay must lie in (0, 1]");
    if (!(sigma_min > 0.0)) throw std::invalid_argument("ga.sigma_min must be > 0");
    if (generations < 0) throw std::invalid_argument("ga.generations must be >= 0");
  }
};

struct HistoryEntry {
  int generation = 0;
  double train_best = 0.0;
  double train_mean = 0.0;
  double val_best = std::numeric_limits<double>::quiet_NaN();  // NaN without validation tasks
  double sigma = 0.0;
};

using TrainHistory = std::vector<HistoryEntry>;

inline PolicyParams decode(const Genome& genome, const PolicyConfig& config) {
  auto flat = flatten(init_params(config, genome.init_seed));
  for (const auto& m : genome.mutations) {
    Rng rng(m.seed);
    for (auto& v : flat) v += m.sigma * rng.normal();
  }
  return unflatten(config, flat);
}

inline double sigma_schedule(int generation, const GaConfig& c) {
  return std::max(c.sigma0 * std::pow(c.sigma_decay, generation), c.sigma_min);
}

/// Indices sorted by ascending fitness, ties by index.
inline std::vector<std::size_t> ranking(const std::vector<double>& fitnesses) {
  std::vector<std::size_t> order(fitnesses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fitnesses[a] < fitnesses[b]; });
  return order;
}

inline std::vector<Genome> evolve_step(const std::vector<Genome>& population, const std::vector<double>& fitnesses,
                                       int generation, const GaConfig& config, Seed seed) {
  config.validate();
  if (population.size() != fitnesses.size())
    throw std::invalid_argument("evolve_step: population and fitness lengths differ");
  if (population.size() != static_cast<std::size_t>(config.population_size))
    throw std::invalid_argument("evolve_step: population size does not match config");
  for (double f : fitnesses)
    if (!std::isfinite(f)) throw std::invalid_argument("evolve_step: non-finite fitness");

  const auto order = ranking(fitnesses);
  const double sigma = sigma_schedule(generation, config);
  std::vector<Genome> next;
  next.reserve(population.size());
  for (int k = 0; k < config.n_elites; ++k) next.push_back(population[order[static_cast<std::size_t>(k)]]);
  for (int k = config.n_elites; k < config.population_size; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const auto parent = order[rng.index(static_cast<std::size_t>(config.n_parents))];
    Genome child = population[parent];
    child.mutations.push_back({derive_seed(seed, static_cast<std::uint64_t>(k), 1), sigma});
    next.push_back(std::move(child));
  }
  return next;
}

struct GenerationReport {
  int generation = 0;
  const std::vector<Genome>* population = nullptr;  // evaluated this generation
  const std::vector<double>* fitnesses = nullptr;
  const Genome* best = nullptr;
  const TrainHistory* history = nullptr;
};

struct TrainResult {
  Genome best;
  double best_fitness = 0.0;
  TrainHistory history;
  std::vector<Genome> population;  // last evaluated population
};

struct TrainOptions {
  int workers = 1;
  std::function<void(const GenerationReport&)> on_generation;
};

namespace detail {

enum SeedStream : std::uint64_t { kInitSeeds = 1, kTrainEpisodes = 2, kValEpisodes = 3, kEvolve = 4 };

}  // namespace detail

/// Runs generations + 1 evaluation rounds (round g evaluates population g;
/// evolution happens between rounds), so generations == 0 means "score the
/// initial population once". All genomes in one round share the same episode
/// seeds. Returns the best genome of the final round.
inline TrainResult train(const GaConfig& ga, const PolicyConfig& policy_config, const TaskSuite& suite,
                         const EpisodeConfig& episode_config, int runs_per_task, Seed master_seed,
                         const TrainOptions& options = {}) {
  ga.validate();
  policy_config.validate();
  const auto train_tasks = suite.tasks_in(Split::Train);
  const auto val_tasks = suite.tasks_in(Split::Validation);
  if (train_tasks.empty()) throw std::invalid_argument("train: suite has no Train tasks");

  std::vector<Genome> population;
  std::set<Seed> used;
  for (std::uint64_t k = 0; static_cast<int>(population.size()) < ga.population_size; ++k) {
    const Seed s = derive_seed(master_seed, detail::kInitSeeds, k);
    if (used.insert(s).second) population.push_back({s, {}});
  }

  EpisodeConfig ep = episode_config;
  ep.lambda = policy_config.lambda;

  TrainResult result;
  for (int g = 0; g <= ga.generations; ++g) {
    const auto block = static_cast<std::uint64_t>(ga.fixed_episode_seeds ? 0 : g);
    const Seed train_seed = derive_seed(master_seed, detail::kTrainEpisodes, block);

    std::vector<double> fitnesses(population.size());
    parallel_for(population.size(), options.workers, [&](std::size_t i) {
      auto params = std::make_shared<const PolicyParams>(decode(population[i], policy_config));
      fitnesses[i] = meta_fitness(policy_factory(params), train_tasks, runs_per_task, ep, train_seed, 1);
    });

    const auto order = ranking(fitnesses);
    const Genome& best = population[order.front()];
    HistoryEntry h;
    h.generation = g;
    h.train_best = fitnesses[order.front()];
    h.train_mean = order_independent_mean(fitnesses);
    h.sigma = sigma_schedule(g, ga);
    if (!val_tasks.empty()) {
      auto params = std::make_shared<const PolicyParams>(decode(best, policy_config));
      h.val_best = meta_fitness(policy_factory(params), val_tasks, runs_per_task, ep,
                                derive_seed(master_seed, detail::kValEpisodes, block), options.workers);
    }
    result.history.push_back(h);
    result.best = best;
    result.best_fitness = h.train_best;
    result.population = population;

    if (options.on_generation) options.on_generation({g, &population, &fitnesses, &best, &result.history});
    if (g < ga.generations)
      population = evolve_step(population, fitnesses, g, ga, derive_seed(master_seed, detail::kEvolve, g));
  }
  return result;
}

}  // namespace lpbo
