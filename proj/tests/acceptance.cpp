// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every tolerance used below is a named constant.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "lpbo/baselines.hpp"
#include "lpbo/bench.hpp"
#include "lpbo/cli.hpp"
#include "lpbo/meta_ga.hpp"
#include "lpbo/meta_loss.hpp"
#include "lpbo/policy.hpp"
#include "oracles.hpp"

using namespace lpbo;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and budgets ----
constexpr double kInvarianceMaxSeconds = 10.0;
constexpr double kErtRelTol = 0.005;
constexpr double kRestartAbsTol = 0.02;
constexpr long kErtTrials = 1'000'000;
constexpr double kErtMaxSeconds = 30.0;
constexpr double kGenomeMaxSeconds = 10.0;
constexpr double kSigmaTol = 1e-15;
constexpr int kCmaMinSolved = 95;
constexpr double kEcdfAbsTol = 0.03;
constexpr double kBaselineMaxSeconds = 120.0;
constexpr double kLearnedMinFraction = 0.8;
constexpr double kConsistencyTol = 1e-12;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Rank-based observations make act blind to increasing transforms of f.
Outcome monotone_invariance() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::function<double(double)>> transforms{
      [](double f) { return f * f * f; }, [](double f) { return 3.5 * f - 7.0; }, [](double f) { return std::exp(f); }};
  long compared = 0;
  for (int k = 0; k < 100; ++k) {
    Rng rng(derive_seed(1001, k));
    const int lambda = 2 + static_cast<int>(rng.index(15));
    const int d = 1 + static_cast<int>(rng.index(5));
    PolicyConfig pc{32, 2, lambda};
    const auto params = init_params(pc, derive_seed(1002, k));
    for (std::size_t t = 0; t < transforms.size(); ++t) {
      auto s_f = PolicyState::zeros(32, 2, lambda, d);
      auto s_g = s_f;
      Observation o_f, o_g;
      for (int g = 0; g < 3; ++g) {
        const Seed step = derive_seed(1003, k, g);
        const auto a_f = act(params, s_f, o_f, step);
        const auto a_g = act(params, s_g, o_g, step);
        if (!(a_f.points == a_g.points))
          return {false, "policy " + std::to_string(k) + " transform " + std::to_string(t) + " generation " +
                             std::to_string(g) + " differs"};
        ++compared;
        Eigen::VectorXd f(lambda);
        for (int i = 0; i < lambda; ++i) f(i) = rng.uniform(0.01, 5.0);
        o_f = next_observation(a_f, f, g + 1);
        o_g = next_observation(a_g, f.unaryExpr(transforms[t]), g + 1);
      }
    }
  }
  const double secs = elapsed(t0);
  std::ostringstream os;
  os << compared << " action batches bit-identical, " << secs << "s (limit " << kInvarianceMaxSeconds << "s)";
  return {secs < kInvarianceMaxSeconds, os.str()};
}

// 2. Restart formula against direct simulation.
Outcome ert_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const long fe_max = 200;
  const double e_succ = 80.0;
  double worst_rel = 0.0, worst_abs = 0.0;
  std::uint64_t s = 1;
  for (double p : {0.1, 0.3, 0.5, 0.9}) {
    const double sim = oracle::simulate_restart_cost(p, static_cast<double>(fe_max), e_succ, kErtTrials, s++);
    worst_rel = std::max(worst_rel, std::abs(expected_fe(p, e_succ, fe_max) - sim) / sim);
    const double fails = oracle::simulate_geometric_failures(p, kErtTrials, s++);
    worst_abs = std::max(worst_abs, std::abs(expected_restarts(p) - fails));
  }
  const double secs = elapsed(t0);
  std::ostringstream os;
  os << "max rel err " << worst_rel << " (tol " << kErtRelTol << "), max restart err " << worst_abs << " (tol "
     << kRestartAbsTol << "), " << secs << "s";
  return {worst_rel <= kErtRelTol && worst_abs <= kRestartAbsTol && secs < kErtMaxSeconds, os.str()};
}

// 3. Genome decoding and one-entry-per-generation growth.
Outcome genome_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const PolicyConfig pc;
  Rng rng(3003);
  std::vector<Genome> genomes;
  for (int k = 0; k < 1000; ++k) {
    Genome g{rng.next(), {}};
    const int n = static_cast<int>(rng.index(4));
    for (int m = 0; m < n; ++m) g.mutations.push_back({rng.next(), rng.uniform(0.01, 0.3)});
    genomes.push_back(g);
  }
  for (const auto& g : genomes)
    if (flatten(decode(g, pc)) != flatten(decode(g, pc))) return {false, "decode not bit-identical"};

  GaConfig ga;
  ga.population_size = 64;
  std::vector<Genome> pop(genomes.begin(), genomes.begin() + 64);
  for (int gen : {0, 1, 200}) {
    std::vector<double> fit(64);
    for (auto& f : fit) f = rng.uniform01();
    const auto order = ranking(fit);
    const auto next = evolve_step(pop, fit, gen, ga, derive_seed(3004, gen));
    for (std::size_t k = static_cast<std::size_t>(ga.n_elites); k < next.size(); ++k) {
      const auto& child = next[k];
      bool found = false;
      for (int r = 0; r < ga.n_parents && !found; ++r) {
        const auto& parent = pop[order[static_cast<std::size_t>(r)]];
        found = child.init_seed == parent.init_seed && child.mutations.size() == parent.mutations.size() + 1 &&
                std::equal(parent.mutations.begin(), parent.mutations.end(), child.mutations.begin());
      }
      if (!found) return {false, "child " + std::to_string(k) + " is not a top-parent plus one mutation"};
      if (child.mutations.back().sigma != sigma_schedule(gen, ga)) return {false, "child sigma off schedule"};
    }
  }
  const double s0 = sigma_schedule(0, ga), s1 = sigma_schedule(1, ga), s200 = sigma_schedule(200, ga);
  const bool sig_ok =
      std::abs(s0 - 0.3) <= kSigmaTol && std::abs(s1 - 0.285) <= kSigmaTol && std::abs(s200 - 0.01) <= kSigmaTol;
  const double secs = elapsed(t0);
  std::ostringstream os;
  os << "1000 genomes stable, sigma(0,1,200) = " << s0 << ", " << s1 << ", " << s200 << ", " << secs << "s";
  return {sig_ok && secs < kGenomeMaxSeconds, os.str()};
}

// 4. CMA-ES solves Sphere; random search ECDF matches sublevel volumes.
Outcome baseline_sanity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream os;
  bool ok = true;
  for (int d : {2, 5}) {
    const auto suite = make_suite({Family::Sphere}, d, 100, {1, 0, 0}, 4004);
    int solved = 0;
    for (std::size_t k = 0; k < suite.tasks.size(); ++k) {
      CmaEs opt;
      const EpisodeConfig cfg{cma_default_lambda(d), 1000L * d, 1e-3, derive_seed(4005, k)};
      solved += run_episode(opt, suite.tasks[k], cfg).success ? 1 : 0;
    }
    os << "cma-es d=" << d << " solved " << solved << "/100; ";
    ok = ok && solved >= kCmaMinSolved;
  }

  // Random search on Sphere d=2 with the default target grid: each (task,
  // target) pair is hit by 200 uniform draws with probability 1 - (1 - q)^200.
  const long fe_max = 200;
  const int runs = 10;
  const auto suite = make_suite({Family::Sphere}, 2, 20, {1, 0, 0}, 4006);
  const auto targets = TargetSet::log_spaced();
  const auto curve = run_ecdf(random_search_factory(), suite.tasks, targets, {10, fe_max, 1e-3, 0}, runs, 4007,
                              {default_workers()});
  double predicted = 0.0;
  std::uint64_t mc_seed = 4008;
  for (const auto& t : suite.tasks) {
    const std::vector<double> c{t.config.shift(0), t.config.shift(1)};
    const double reach = std::max(std::abs(c[0]), std::abs(c[1]));
    for (double target : targets.precisions()) {
      const double radius = std::sqrt(target / 25.0);
      const double q = reach + radius <= 1.0 ? oracle::sphere_sublevel_probability_local(c, target, 200'000, mc_seed++)
                                             : oracle::sphere_sublevel_probability(c, target, 400'000, mc_seed++);
      predicted += 1.0 - std::pow(1.0 - q, static_cast<double>(fe_max));
    }
  }
  predicted /= static_cast<double>(suite.tasks.size() * targets.size());
  const double diff = std::abs(curve.final_fraction() - predicted);
  const double secs = elapsed(t0);
  os << "rs final ECDF " << curve.final_fraction() << " vs predicted " << predicted << " (tol " << kEcdfAbsTol << "), "
     << secs << "s";
  return {ok && diff <= kEcdfAbsTol && secs < kBaselineMaxSeconds, os.str()};
}

// 5. Scaled LinearSlope training run against batch random search.
Outcome linear_slope_reproduction() {
  const int n_train = 8, n_val = 8, n_test = 50;
  const int n = n_train + n_val + n_test;
  const auto suite = make_suite({Family::LinearSlope}, 2, n,
                                {static_cast<double>(n_train) / n, static_cast<double>(n_val) / n,
                                 static_cast<double>(n_test) / n},
                                5005);
  if (suite.count(Split::Train) != n_train || suite.count(Split::Test) != n_test)
    return {false, "unexpected split sizes"};
  GaConfig ga;
  ga.population_size = 32;
  ga.generations = 30;
  PolicyConfig pc{32, 2, 10};
  const EpisodeConfig ep{10, 200, 1e-3, 0};
  const auto result = train(ga, pc, suite, ep, 3, 5006, {default_workers(), {}});
  auto params = std::make_shared<const PolicyParams>(decode(result.best, pc));

  const auto test = suite.tasks_in(Split::Test);
  const auto targets = TargetSet::log_spaced(1e2, 1e-3);
  const auto report = compare({{"learned", policy_factory(params), {}}, {"rs", random_search_factory(), {}}}, test,
                              targets, ep, 3, 5007, {default_workers()});
  const auto& learned = report.entries[0];
  const auto& rs = report.entries[1];
  const auto at_tol = run_ecdf(policy_factory(params), test, TargetSet::single(1e-3), ep, 3, 5007, {default_workers()});

  std::ostringstream os;
  os << "learned final " << learned.final_fraction << " auc " << learned.auc << "; rs final " << rs.final_fraction
     << " auc " << rs.auc << "; learned at 1e-3 " << at_tol.final_fraction() << " (min " << kLearnedMinFraction
     << "); train best " << result.best_fitness;
  return {learned.final_fraction >= rs.final_fraction && learned.auc >= rs.auc &&
              at_tol.final_fraction() >= kLearnedMinFraction,
          os.str()};
}

// 6. Smoke pipeline through the CLI commands, twice per worker count.
Outcome end_to_end_determinism() {
  const auto root = fs::temp_directory_path() / "lpbo_acceptance_e2e";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto config = (root / "smoke.json").string();
  std::ofstream(config) << R"({
  "suite": {"families": ["Sphere", "Rastrigin"], "dimension": 2, "instances_per_family": 3, "split": [0.34, 0.33, 0.33]},
  "policy": {"hidden_size": 8, "num_layers": 2},
  "ga": {"population_size": 8, "n_elites": 2, "n_parents": 4, "generations": 2},
  "episode": {"lambda": 6, "fe_max": 60, "tolerance": 0.001},
  "runs_per_task": 2,
  "master_seed": 6006
})";
  const std::vector<std::string> files{"history.csv", "eval_ecdf.csv", "eval_ert.csv", "compare_ecdf.csv",
                                       "compare_summary.csv"};
  std::ostringstream sink;
  cli::CommandIo io{sink, sink};
  std::vector<std::string> reference;
  int runs = 0;
  for (int workers : {1, 4, 1, 4}) {
    const auto dir = root / ("run" + std::to_string(runs++));
    cli::Overrides o;
    o.out = dir.string();
    o.workers = workers;
    if (cli::cmd_train(config, o, io) != 0) return {false, "train failed: " + sink.str()};
    const cli::PolicySource src{(dir / "checkpoint.json").string(), std::nullopt};
    if (cli::cmd_eval(src, config, o, Split::Test, io) != 0) return {false, "eval failed: " + sink.str()};
    if (cli::cmd_compare(src, config, o, std::nullopt, Split::Test, io) != 0)
      return {false, "compare failed: " + sink.str()};
    std::vector<std::string> contents;
    for (const auto& f : files) contents.push_back(slurp(dir / f));
    if (reference.empty()) {
      reference = contents;
    } else {
      for (std::size_t k = 0; k < files.size(); ++k)
        if (contents[k] != reference[k] || contents[k].empty())
          return {false, files[k] + " differs at workers=" + std::to_string(workers)};
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(files.size()) + " CSVs byte-identical over 4 runs (workers 1, 4)"};
}

// 7. Single-target ECDF endpoint equals the mean success rate.
Outcome ecdf_ert_consistency() {
  const auto suite = make_suite({Family::Sphere, Family::Rastrigin, Family::LinearSlope}, 2, 5, {1, 0, 0}, 7007);
  const EpisodeConfig ep{6, 200, 1e-3, 0};
  double worst = 0.0;
  for (const auto& [name, factory] :
       std::vector<std::pair<std::string, OptimizerFactory>>{{"rs", random_search_factory()},
                                                             {"cma-es", cma_es_factory()}}) {
    for (double target : {1e-3, 1e-1, 10.0}) {
      const auto curve = run_ecdf(factory, suite.tasks, TargetSet::single(target), ep, 4, 7008);
      const auto rows = ert_table(factory, suite.tasks, TargetSet::single(target), ep, 4, 7008);
      double p = 0.0;
      for (const auto& r : rows) p += r.stats.p_hat;
      p /= static_cast<double>(rows.size());
      worst = std::max(worst, std::abs(curve.final_fraction() - p));
    }
  }
  std::ostringstream os;
  os << "max |ecdf final - mean p_hat| = " << worst << " (tol " << kConsistencyTol << ")";
  return {worst <= kConsistencyTol, os.str()};
}

}  // namespace

int main() {
  report(1, "monotone invariance", monotone_invariance);
  report(2, "ERT oracle equivalence", ert_oracle);
  report(3, "genome determinism", genome_determinism);
  report(4, "baseline sanity", baseline_sanity);
  report(5, "LinearSlope d=2 reproduction", linear_slope_reproduction);
  report(6, "end-to-end determinism", end_to_end_determinism);
  report(7, "ECDF/ERT consistency", ecdf_ert_consistency);
  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
