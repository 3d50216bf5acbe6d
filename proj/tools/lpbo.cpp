// lpbo: train, evaluate and compare learned population-based optimizers.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lpbo/cli.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::string split = "test";
  lpbo::Seed seed = 0;
  int workers = 0;
  int generations = -1;
  int population = 0;
  int dimension = 0;
  int instances = 0;
  int runs = 0;
  std::vector<std::string> families;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_split) {
  app->add_option("--config", f.config, "JSON run configuration");
  app->add_option("--seed", f.seed, "master seed (overrides config)");
  app->add_option("--out", f.out, "output directory (overrides config)");
  app->add_option("--workers", f.workers, "worker threads (default: LPBO_WORKERS or all cores)");
  app->add_option("--generations", f.generations, "meta-GA generations");
  app->add_option("--population", f.population, "meta-GA population size");
  app->add_option("--dimension", f.dimension, "problem dimension");
  app->add_option("--instances", f.instances, "instances per family");
  app->add_option("--runs-per-task", f.runs, "episodes per task");
  app->add_option("--families", f.families, "function families");
  if (with_split) app->add_option("--split", f.split, "train | val | test");
}

std::optional<std::string> opt_str(const std::string& s) { return s.empty() ? std::nullopt : std::optional(s); }

lpbo::cli::Overrides overrides_of(const CommonFlags& f, const CLI::App* app) {
  lpbo::cli::Overrides o;
  if (app->count("--seed")) o.seed = f.seed;
  if (!f.out.empty()) o.out = f.out;
  if (app->count("--workers")) o.workers = f.workers;
  if (app->count("--generations")) o.generations = f.generations;
  if (app->count("--population")) o.population = f.population;
  if (app->count("--dimension")) o.dimension = f.dimension;
  if (app->count("--instances")) o.instances = f.instances;
  if (app->count("--runs-per-task")) o.runs_per_task = f.runs;
  if (!f.families.empty()) o.families = f.families;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned population-based black-box optimizers"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, cmp_f, list_f;
  std::string eval_ck, eval_params, cmp_ck, cmp_params, dec_ck, dec_out = "params.json";
  std::vector<std::string> baselines;
  bool list_write = false;

  auto* train = app.add_subcommand("train", "meta-train a policy with the seed-list GA");
  add_common(train, train_f, false);

  auto* eval = app.add_subcommand("eval", "ECDF / ERT of a trained policy on one split");
  add_common(eval, eval_f, true);
  eval->add_option("--checkpoint", eval_ck, "training checkpoint");
  eval->add_option("--params", eval_params, "raw parameter file from `decode`");

  auto* cmp = app.add_subcommand("compare", "compare a trained policy against baselines");
  add_common(cmp, cmp_f, true);
  cmp->add_option("--checkpoint", cmp_ck, "training checkpoint");
  cmp->add_option("--params", cmp_params, "raw parameter file from `decode`");
  cmp->add_option("--baselines", baselines, "subset of: rs cma-es")->delimiter(',');

  auto* list = app.add_subcommand("list-suite", "print the task suite as CSV");
  add_common(list, list_f, false);
  list->add_flag("--write", list_write, "also write <out>/suite.csv");

  auto* dec = app.add_subcommand("decode", "expand a checkpoint's best genome into a parameter file");
  dec->add_option("--checkpoint", dec_ck, "training checkpoint")->required();
  dec->add_option("--out", dec_out, "output parameter file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lpbo::cli::kExitUsage;
  }

  using namespace lpbo::cli;
  try {
    if (*train) return cmd_train(opt_str(train_f.config), overrides_of(train_f, train));
    if (*list) return cmd_list_suite(opt_str(list_f.config), overrides_of(list_f, list), list_write);
    if (*dec) return cmd_decode(dec_ck, dec_out);
    if (*eval)
      return cmd_eval({opt_str(eval_ck), opt_str(eval_params)}, opt_str(eval_f.config), overrides_of(eval_f, eval),
                      lpbo::parse_split(eval_f.split));
    if (*cmp)
      return cmd_compare({opt_str(cmp_ck), opt_str(cmp_params)}, opt_str(cmp_f.config), overrides_of(cmp_f, cmp),
                         cmp->count("--baselines") ? std::optional(baselines) : std::nullopt,
                         lpbo::parse_split(cmp_f.split));
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
