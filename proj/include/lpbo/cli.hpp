#pragma once

// Subcommand implementations shared by the `lpbo` executable and the tests.
// Each command returns a process exit code: 0 success, 1 runtime error,
// 2 usage / config / input-file error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lpbo/baselines.hpp"
#include "lpbo/bench.hpp"
#include "lpbo/config.hpp"
#include "lpbo/format.hpp"
#include "lpbo/meta_ga.hpp"
#include "lpbo/policy.hpp"
#include "lpbo/problems.hpp"

namespace lpbo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline const std::vector<std::string>& valid_baselines() {
  static const std::vector<std::string> names{"rs", "cma-es"};
  return names;
}

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<Seed> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<int> generations;
  std::optional<int> population;
  std::optional<int> dimension;
  std::optional<int> instances;
  std::optional<int> runs_per_task;
  std::optional<std::vector<std::string>> families;
};

inline void apply(RunConfig& c, const Overrides& o) {
  if (o.seed) c.master_seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.workers) c.workers = *o.workers;
  if (o.generations) c.ga.generations = *o.generations;
  if (o.population) c.ga.population_size = *o.population;
  if (o.dimension) c.suite.dimension = *o.dimension;
  if (o.instances) c.suite.instances_per_family = *o.instances;
  if (o.runs_per_task) c.runs_per_task = *o.runs_per_task;
  if (o.families) {
    c.suite.families.clear();
    for (const auto& n : *o.families) {
      try {
        c.suite.families.push_back(parse_family(n));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  c.policy.lambda = c.episode.lambda;
}

/// Loads the config file (when given), applies overrides, validates.
inline RunConfig resolve_config(const std::optional<std::string>& config_path, const Overrides& o) {
  RunConfig c = config_path ? load_run_config(*config_path) : RunConfig{};
  apply(c, o);
  c.validate();
  return c;
}

inline TaskSuite build_suite(const RunConfig& c) {
  return make_suite(std::span<const Family>(c.suite.families), c.suite.dimension, c.suite.instances_per_family,
                    c.suite.split, c.master_seed);
}

namespace detail {

enum SeedStream : std::uint64_t { kEvalSeed = 10 };

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

inline void write_metadata(const RunConfig& c, const std::string& command) {
  const json meta{{"format_version", kFormatVersion},
                  {"command", command},
                  {"config_hash", config_hash(c)},
                  {"seed", c.master_seed},
                  {"config", to_json(c)}};
  write_text(std::filesystem::path(c.output_dir) / (command + "_metadata.json"), meta.dump(2) + "\n");
}

inline std::string history_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << "generation,train_best,train_mean,val_best,sigma\n";
  for (const auto& e : h)
    os << e.generation << ',' << format_double(e.train_best) << ',' << format_double(e.train_mean) << ','
       << format_double(e.val_best) << ',' << format_double(e.sigma) << '\n';
  return os.str();
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace detail

struct CommandIo {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

/// train: meta-trains a policy. Writes checkpoint.json (every
/// checkpoint_every generations and at the end), best_genome.json,
/// history.csv and train_metadata.json into the output directory.
inline int cmd_train(const std::optional<std::string>& config_path, const Overrides& overrides,
                     CommandIo io = {}) {
  return detail::guarded(io.err, [&] {
    const RunConfig c = resolve_config(config_path, overrides);
    std::filesystem::create_directories(c.output_dir);
    const auto suite = build_suite(c);
    const auto dir = std::filesystem::path(c.output_dir);
    const auto t0 = std::chrono::steady_clock::now();

    auto save = [&](int generation, const std::vector<Genome>& pop, const Genome& best, double best_fitness,
                    const TrainHistory& hist) {
      Checkpoint ck{c, generation, pop, best, best_fitness, hist};
      detail::write_text(dir / "checkpoint.json", to_json(ck).dump() + "\n");
      detail::write_text(dir / "history.csv", detail::history_csv(hist));
    };

    TrainOptions opts;
    opts.workers = c.resolved_workers();
    opts.on_generation = [&](const GenerationReport& r) {
      const auto& h = r.history->back();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      io.out << "generation " << h.generation << "  train_best " << format_double(h.train_best) << "  val_best "
             << format_double(h.val_best) << "  sigma " << format_double(h.sigma) << "  wall " << std::fixed
             << std::setprecision(1) << secs << "s" << std::defaultfloat << std::setprecision(6) << '\n';
      if (r.generation % c.checkpoint_every == 0)
        save(r.generation, *r.population, *r.best, r.history->back().train_best, *r.history);
    };

    const auto result = train(c.ga, c.policy, suite, c.episode, c.runs_per_task, c.master_seed, opts);
    save(c.ga.generations, result.population, result.best, result.best_fitness, result.history);
    const json best{{"format_version", kFormatVersion},
                    {"policy_config", to_json(c.policy)},
                    {"genome", to_json(result.best)},
                    {"train_fitness", result.best_fitness}};
    detail::write_text(dir / "best_genome.json", best.dump(2) + "\n");
    detail::write_metadata(c, "train");
    return kExitOk;
  });
}

/// Learned optimizer source for eval/compare: a checkpoint (best genome) or a
/// raw parameter file written by `decode`.
struct PolicySource {
  std::optional<std::string> checkpoint;
  std::optional<std::string> params;
};

struct LoadedPolicy {
  std::shared_ptr<const PolicyParams> params;
  std::optional<RunConfig> run_config;  // present when loaded from a checkpoint
};

inline LoadedPolicy load_policy(const PolicySource& src) {
  if (src.checkpoint && src.params) throw ConfigError("give either --checkpoint or --params, not both");
  if (src.checkpoint) {
    const auto ck = load_checkpoint(*src.checkpoint);
    return {std::make_shared<const PolicyParams>(decode(ck.best, ck.run_config.policy)), ck.run_config};
  }
  if (src.params) {
    auto [pc, p] = params_from_json(parse_json_text(read_file(*src.params, "parameter file"),
                                                    "parameter file '" + *src.params + "'"));
    return {std::make_shared<const PolicyParams>(std::move(p)), std::nullopt};
  }
  throw ConfigError("a --checkpoint or --params file is required");
}

// The checkpoint's run configuration is the base unless --config is given.
inline RunConfig config_for_policy(const LoadedPolicy& lp, const std::optional<std::string>& config_path,
                                   const Overrides& overrides) {
  RunConfig c = config_path ? load_run_config(*config_path) : lp.run_config.value_or(RunConfig{});
  apply(c, overrides);
  c.validate();
  if (lp.params->layers.empty()) throw ConfigError("policy has no layers");
  return c;
}

/// eval: ECDF and ERT of the learned optimizer on one split.
inline int cmd_eval(const PolicySource& source, const std::optional<std::string>& config_path,
                    const Overrides& overrides, Split split, CommandIo io = {}) {
  return detail::guarded(io.err, [&] {
    const auto lp = load_policy(source);
    const RunConfig c = config_for_policy(lp, config_path, overrides);
    std::filesystem::create_directories(c.output_dir);
    const auto tasks = build_suite(c).tasks_in(split);
    if (tasks.empty()) throw ConfigError("split '" + std::string(to_string(split)) + "' has no tasks");

    const auto targets = TargetSet::log_spaced(1e2, c.episode.tolerance);
    const Seed seed = derive_seed(c.master_seed, detail::kEvalSeed);
    const auto records = run_episodes(policy_factory(lp.params), tasks, c.episode, c.runs_per_task, seed,
                                      c.resolved_workers());
    const auto curve = ecdf_from_first_hits(first_hits(records, targets), c.fe_max());
    const auto rows = ert_from_records(tasks, records, targets);

    std::ostringstream ecdf, ert;
    write_ecdf_header(ecdf);
    write_ecdf_rows(ecdf, "learned", curve);
    write_ert_header(ert);
    write_ert_rows(ert, "learned", rows);
    const auto dir = std::filesystem::path(c.output_dir);
    detail::write_text(dir / "eval_ecdf.csv", ecdf.str());
    detail::write_text(dir / "eval_ert.csv", ert.str());
    detail::write_metadata(c, "eval");
    io.out << "split " << to_string(split) << ": " << tasks.size() << " tasks, final fraction "
           << format_double(curve.final_fraction()) << ", auc " << format_double(ecdf_auc(curve)) << '\n';
    return kExitOk;
  });
}

/// compare: learned optimizer against the named baselines on one split.
inline int cmd_compare(const PolicySource& source, const std::optional<std::string>& config_path,
                       const Overrides& overrides, const std::optional<std::vector<std::string>>& baselines,
                       Split split = Split::Test, CommandIo io = {}) {
  return detail::guarded(io.err, [&] {
    if (baselines) {
      for (const auto& b : *baselines) {
        if (std::find(valid_baselines().begin(), valid_baselines().end(), b) == valid_baselines().end())
          throw ConfigError("unknown baseline '" + b + "' (valid: rs, cma-es)");
      }
    }
    const auto lp = load_policy(source);
    RunConfig c = config_for_policy(lp, config_path, overrides);
    if (baselines) c.baselines = *baselines;
    if (c.baselines.empty()) throw ConfigError("compare needs at least one baseline (valid: rs, cma-es)");
    std::filesystem::create_directories(c.output_dir);
    const auto tasks = build_suite(c).tasks_in(split);
    if (tasks.empty()) throw ConfigError("split '" + std::string(to_string(split)) + "' has no tasks");

    std::vector<NamedOptimizer> opts{{"learned", policy_factory(lp.params), std::nullopt}};
    for (const auto& b : c.baselines) {
      if (b == "rs") opts.push_back({"rs", random_search_factory(), std::nullopt});
      if (b == "cma-es") {
        std::optional<int> lam;
        if (c.baseline_default_lambda) lam = cma_default_lambda(c.suite.dimension);
        opts.push_back({"cma-es", cma_es_factory(), lam});
      }
    }
    const auto targets = TargetSet::log_spaced(1e2, c.episode.tolerance);
    BenchOptions bo{c.resolved_workers()};
    const auto report = compare(opts, tasks, targets, c.episode, c.runs_per_task,
                                derive_seed(c.master_seed, detail::kEvalSeed), bo);

    std::ostringstream ecdf, summary;
    write_comparison_csv(ecdf, report);
    write_comparison_summary(summary, report);
    const auto dir = std::filesystem::path(c.output_dir);
    detail::write_text(dir / "compare_ecdf.csv", ecdf.str());
    detail::write_text(dir / "compare_summary.csv", summary.str());
    detail::write_metadata(c, "compare");

    io.out << std::left << std::setw(10) << "optimizer" << std::setw(22) << "auc" << "final_fraction\n";
    for (const auto& e : report.entries)
      io.out << std::left << std::setw(10) << e.name << std::setw(22) << format_double(e.auc)
             << format_double(e.final_fraction) << '\n';
    return kExitOk;
  });
}

/// list-suite: one CSV row per task (to stdout, and to <out>/suite.csv when
/// write_file is set).
inline int cmd_list_suite(const std::optional<std::string>& config_path, const Overrides& overrides,
                          bool write_file = false, CommandIo io = {}) {
  return detail::guarded(io.err, [&] {
    const RunConfig c = resolve_config(config_path, overrides);
    const auto suite = build_suite(c);
    std::ostringstream os;
    os << "task_id,family,dimension,split,optimum_value\n";
    for (std::size_t i = 0; i < suite.tasks.size(); ++i) {
      const auto& t = suite.tasks[i];
      os << t.task_id << ',' << to_string(t.family) << ',' << t.dimension << ',' << to_string(suite.split[i]) << ','
         << format_double(t.optimum_value) << '\n';
    }
    io.out << os.str();
    if (write_file) {
      std::filesystem::create_directories(c.output_dir);
      detail::write_text(std::filesystem::path(c.output_dir) / "suite.csv", os.str());
    }
    return kExitOk;
  });
}

/// decode: best genome of a checkpoint -> parameter file.
inline int cmd_decode(const std::string& checkpoint_path, const std::string& out_path, CommandIo io = {}) {
  return detail::guarded(io.err, [&] {
    const auto ck = load_checkpoint(checkpoint_path);
    const auto params = decode(ck.best, ck.run_config.policy);
    const auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    detail::write_text(out_path, params_to_json(ck.run_config.policy, params).dump() + "\n");
    io.out << "wrote " << parameter_count(ck.run_config.policy) << " parameters to " << out_path << '\n';
    return kExitOk;
  });
}

}  // namespace lpbo::cli
