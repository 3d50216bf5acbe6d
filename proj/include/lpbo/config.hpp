#pragma once

// Run configuration, its JSON form, and the checkpoint / parameter file
// schemas. All files carry "format_version".

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpbo/baselines.hpp"
#include "lpbo/format.hpp"
#include "lpbo/meta_ga.hpp"
#include "lpbo/parallel.hpp"
#include "lpbo/policy.hpp"
#include "lpbo/problems.hpp"

namespace lpbo {

inline constexpr int kFormatVersion = 1;

using json = nlohmann::json;

/// Invalid user input (config, overrides, input files). Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SuiteSpec {
  std::vector<Family> families{Family::Sphere};
  int dimension = 2;
  int instances_per_family = 1000;
  std::array<double, 3> split{0.1, 0.1, 0.8};
};

struct RunConfig {
  SuiteSpec suite;
  PolicyConfig policy;
  GaConfig ga;
  EpisodeConfig episode;
  int runs_per_task = 5;
  Seed master_seed = 0;
  std::string output_dir = "out";
  int workers = 0;  // 0: LPBO_WORKERS or hardware concurrency
  int checkpoint_every = 1;
  std::vector<std::string> baselines{"rs", "cma-es"};
  bool baseline_default_lambda = false;  // use 4 + 3 ln d for CMA-ES instead of the shared lambda

  int resolved_workers() const { return workers > 0 ? workers : default_workers(); }
  long fe_max() const { return episode.resolved_fe_max(suite.dimension); }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
    if (suite.families.empty()) fail("suite.families must not be empty");
    if (suite.dimension < 1) fail("suite.dimension must be >= 1");
    if (suite.instances_per_family < 3) fail("suite.instances_per_family must be >= 3");
    double sum = 0.0;
    for (double r : suite.split) {
      if (!(r >= 0.0)) fail("suite.split fractions must be non-negative");
      sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("suite.split fractions must sum to 1");
    if (episode.lambda < 2) fail("episode.lambda must be >= 2");
    if (fe_max() < episode.lambda) fail("episode.fe_max (" + std::to_string(fe_max()) + ") must be >= episode.lambda");
    if (!(episode.tolerance > 0.0)) fail("episode.tolerance must be > 0");
    if (policy.hidden_size < 1) fail("policy.hidden_size must be >= 1");
    if (policy.num_layers < 1) fail("policy.num_layers must be >= 1");
    if (runs_per_task < 1) fail("runs_per_task must be >= 1");
    if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
    try {
      ga.validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    for (const auto& b : baselines)
      if (b != "rs" && b != "cma-es") fail("unknown baseline '" + b + "' (valid: rs, cma-es)");
  }
};

// ---- JSON ----

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("invalid config field '" + path + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const Genome& g) {
  json m = json::array();
  for (const auto& mu : g.mutations) m.push_back(json::array({mu.seed, mu.sigma}));
  return {{"init_seed", g.init_seed}, {"mutations", m}};
}

inline Genome genome_from_json(const json& j) {
  Genome g;
  g.init_seed = j.at("init_seed").get<Seed>();
  for (const auto& m : j.at("mutations")) g.mutations.push_back({m.at(0).get<Seed>(), m.at(1).get<double>()});
  return g;
}

inline json to_json(const PolicyConfig& p) {
  return {{"hidden_size", p.hidden_size}, {"num_layers", p.num_layers}, {"lambda", p.lambda},
          {"input_size", PolicyConfig::input_size}, {"output_size", PolicyConfig::output_size}};
}

inline PolicyConfig policy_config_from_json(const json& j) {
  PolicyConfig p;
  detail::read_field(j, "hidden_size", "policy.", p.hidden_size);
  detail::read_field(j, "num_layers", "policy.", p.num_layers);
  detail::read_field(j, "lambda", "policy.", p.lambda);
  return p;
}

inline json to_json(const GaConfig& g) {
  return {{"population_size", g.population_size}, {"n_elites", g.n_elites},       {"n_parents", g.n_parents},
          {"sigma0", g.sigma0},                   {"sigma_decay", g.sigma_decay}, {"sigma_min", g.sigma_min},
          {"generations", g.generations},         {"fixed_episode_seeds", g.fixed_episode_seeds}};
}

inline GaConfig ga_config_from_json(const json& j) {
  GaConfig g;
  detail::read_field(j, "population_size", "ga.", g.population_size);
  detail::read_field(j, "n_elites", "ga.", g.n_elites);
  detail::read_field(j, "n_parents", "ga.", g.n_parents);
  detail::read_field(j, "sigma0", "ga.", g.sigma0);
  detail::read_field(j, "sigma_decay", "ga.", g.sigma_decay);
  detail::read_field(j, "sigma_min", "ga.", g.sigma_min);
  detail::read_field(j, "generations", "ga.", g.generations);
  detail::read_field(j, "fixed_episode_seeds", "ga.", g.fixed_episode_seeds);
  return g;
}

inline json to_json(const RunConfig& c) {
  json fams = json::array();
  for (auto f : c.suite.families) fams.push_back(std::string(to_string(f)));
  return {
      {"suite",
       {{"families", fams},
        {"dimension", c.suite.dimension},
        {"instances_per_family", c.suite.instances_per_family},
        {"split", c.suite.split}}},
      {"policy", {{"hidden_size", c.policy.hidden_size}, {"num_layers", c.policy.num_layers}}},
      {"ga", to_json(c.ga)},
      {"episode", {{"lambda", c.episode.lambda}, {"fe_max", c.fe_max()}, {"tolerance", c.episode.tolerance}}},
      {"runs_per_task", c.runs_per_task},
      {"master_seed", c.master_seed},
      {"checkpoint_every", c.checkpoint_every},
      {"baselines", c.baselines},
      {"baseline_default_lambda", c.baseline_default_lambda},
  };
}

/// Parses a config tree. Missing keys keep their defaults.
inline RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("invalid config: top level must be an object");
  RunConfig c;
  if (j.contains("suite")) {
    const auto& s = j.at("suite");
    if (s.contains("families")) {
      std::vector<std::string> names;
      detail::read_field(s, "families", "suite.", names);
      c.suite.families.clear();
      for (const auto& n : names) {
        try {
          c.suite.families.push_back(parse_family(n));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("invalid config field 'suite.families': ") + e.what());
        }
      }
    }
    detail::read_field(s, "dimension", "suite.", c.suite.dimension);
    detail::read_field(s, "instances_per_family", "suite.", c.suite.instances_per_family);
    detail::read_field(s, "split", "suite.", c.suite.split);
  }
  if (j.contains("policy")) {
    detail::read_field(j.at("policy"), "hidden_size", "policy.", c.policy.hidden_size);
    detail::read_field(j.at("policy"), "num_layers", "policy.", c.policy.num_layers);
  }
  if (j.contains("ga")) c.ga = ga_config_from_json(j.at("ga"));
  if (j.contains("episode")) {
    const auto& e = j.at("episode");
    detail::read_field(e, "lambda", "episode.", c.episode.lambda);
    detail::read_field(e, "fe_max", "episode.", c.episode.fe_max);
    detail::read_field(e, "tolerance", "episode.", c.episode.tolerance);
  }
  detail::read_field(j, "runs_per_task", "", c.runs_per_task);
  detail::read_field(j, "master_seed", "", c.master_seed);
  detail::read_field(j, "output_dir", "", c.output_dir);
  detail::read_field(j, "workers", "", c.workers);
  detail::read_field(j, "checkpoint_every", "", c.checkpoint_every);
  detail::read_field(j, "baselines", "", c.baselines);
  detail::read_field(j, "baseline_default_lambda", "", c.baseline_default_lambda);
  c.policy.lambda = c.episode.lambda;
  return c;
}

/// Parses JSON text; syntax errors report the byte offset.
inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(parse_json_text(read_file(path, "config file"), "config file '" + path + "'"));
}

/// Fingerprint of everything that affects numerical results.
inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

inline json to_json(const HistoryEntry& h) {
  return {{"generation", h.generation},
          {"train_best", h.train_best},
          {"train_mean", h.train_mean},
          {"val_best", std::isnan(h.val_best) ? json(nullptr) : json(h.val_best)},
          {"sigma", h.sigma}};
}

inline HistoryEntry history_entry_from_json(const json& j) {
  HistoryEntry h;
  h.generation = j.at("generation").get<int>();
  h.train_best = j.at("train_best").get<double>();
  h.train_mean = j.at("train_mean").get<double>();
  h.val_best = j.at("val_best").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("val_best").get<double>();
  h.sigma = j.at("sigma").get<double>();
  return h;
}

struct Checkpoint {
  RunConfig run_config;
  int generation = 0;
  std::vector<Genome> population;
  Genome best;
  double best_fitness = 0.0;
  TrainHistory history;
};

inline json to_json(const Checkpoint& ck) {
  json pop = json::array();
  for (const auto& g : ck.population) pop.push_back(to_json(g));
  json hist = json::array();
  for (const auto& h : ck.history) hist.push_back(to_json(h));
  PolicyConfig pc = ck.run_config.policy;
  return {{"format_version", kFormatVersion},
          {"ga_config", to_json(ck.run_config.ga)},
          {"policy_config", to_json(pc)},
          {"run_config", to_json(ck.run_config)},
          {"generation", ck.generation},
          {"population", pop},
          {"best", to_json(ck.best)},
          {"best_fitness", ck.best_fitness},
          {"history", hist}};
}

inline void check_format_version(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("format_version"))
    throw ConfigError(what + ": missing format_version");
  const auto v = j.at("format_version");
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion)
    throw ConfigError(what + ": format_version " + v.dump() + " is not supported (expected " +
                      std::to_string(kFormatVersion) + ")");
}

inline Checkpoint checkpoint_from_json(const json& j) {
  check_format_version(j, "checkpoint");
  try {
    Checkpoint ck;
    ck.run_config = run_config_from_json(j.at("run_config"));
    ck.run_config.ga = ga_config_from_json(j.at("ga_config"));
    const auto pc = policy_config_from_json(j.at("policy_config"));
    ck.run_config.policy = pc;
    ck.generation = j.at("generation").get<int>();
    for (const auto& g : j.at("population")) ck.population.push_back(genome_from_json(g));
    ck.best = genome_from_json(j.at("best"));
    ck.best_fitness = j.at("best_fitness").get<double>();
    for (const auto& h : j.at("history")) ck.history.push_back(history_entry_from_json(h));
    return ck;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed content: ") + e.what());
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(parse_json_text(read_file(path, "checkpoint"), "checkpoint '" + path + "'"));
}

// Parameter file: {format_version, policy_config, flat_params}.
inline json params_to_json(const PolicyConfig& pc, const PolicyParams& p) {
  return {{"format_version", kFormatVersion}, {"policy_config", to_json(pc)}, {"flat_params", flatten(p)}};
}

inline std::pair<PolicyConfig, PolicyParams> params_from_json(const json& j) {
  check_format_version(j, "parameter file");
  try {
    const auto pc = policy_config_from_json(j.at("policy_config"));
    const auto flat = j.at("flat_params").get<std::vector<double>>();
    return {pc, unflatten(pc, flat)};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parameter file: malformed content: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("parameter file: ") + e.what());
  }
}

}  // namespace lpbo
