#pragma once

// Evaluation harness: first-hit ECDFs over a set of gap-to-optimum targets,
// per-(task, target) expected-runtime tables, and multi-optimizer comparisons.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpbo/format.hpp"
#include "lpbo/meta_loss.hpp"
#include "lpbo/pomdp_env.hpp"
#include "lpbo/problems.hpp"

namespace lpbo {

class TargetSet {
 public:
  TargetSet() = default;
  explicit TargetSet(std::vector<double> precisions) : precisions_(std::move(precisions)) {
    if (precisions_.empty()) throw std::invalid_argument("TargetSet: no targets");
    for (std::size_t i = 0; i < precisions_.size(); ++i) {
      if (!(precisions_[i] > 0.0) || !std::isfinite(precisions_[i]))
        throw std::invalid_argument("TargetSet: targets must be positive and finite");
      if (i > 0 && !(precisions_[i] < precisions_[i - 1]))
        throw std::invalid_argument("TargetSet: targets must be strictly decreasing");
    }
  }

  /// 5 per decade from 1e2 down to `tolerance`.
  static TargetSet log_spaced(double high = 1e2, double tolerance = 1e-3, int per_decade = 5) {
    const int n = static_cast<int>(std::lround(std::log10(high / tolerance) * per_decade));
    std::vector<double> p;
    for (int k = 0; k <= n; ++k) p.push_back(std::pow(10.0, std::log10(high) - static_cast<double>(k) / per_decade));
    p.back() = tolerance;
    return TargetSet(std::move(p));
  }

  static TargetSet single(double tolerance) { return TargetSet({tolerance}); }

  const std::vector<double>& precisions() const { return precisions_; }
  std::size_t size() const { return precisions_.size(); }

 private:
  std::vector<double> precisions_;
};

struct EcdfCurve {
  std::vector<long> budgets;  // 1..fe_max
  std::vector<double> fraction_solved;
  std::vector<long> hits;  // number of solved triples at each budget
  long n_pairs = 0;

  double final_fraction() const { return fraction_solved.empty() ? 0.0 : fraction_solved.back(); }
};

/// Builds the curve from recorded first-hit times (absent = never hit).
inline EcdfCurve ecdf_from_first_hits(const std::vector<std::optional<long>>& first_hits, long fe_max) {
  EcdfCurve c;
  c.n_pairs = static_cast<long>(first_hits.size());
  if (c.n_pairs == 0) throw std::invalid_argument("ecdf: no (task, target) pairs");
  std::vector<long> at(static_cast<std::size_t>(fe_max) + 1, 0);
  for (const auto& h : first_hits)
    if (h && *h <= fe_max) ++at[static_cast<std::size_t>(std::max(1L, *h))];
  long cum = 0;
  for (long b = 1; b <= fe_max; ++b) {
    cum += at[static_cast<std::size_t>(b)];
    c.budgets.push_back(b);
    c.hits.push_back(cum);
    c.fraction_solved.push_back(static_cast<double>(cum) / static_cast<double>(c.n_pairs));
  }
  return c;
}

inline std::vector<std::optional<long>> first_hits(const std::vector<std::vector<RolloutRecord>>& records,
                                                    const TargetSet& targets) {
  std::vector<std::optional<long>> out;
  for (const auto& runs : records)
    for (const auto& r : runs)
      for (double t : targets.precisions()) out.push_back(first_hit(r, t));
  return out;
}

struct BenchOptions {
  int workers = 1;
};

inline long common_fe_max(const std::vector<Task>& tasks, const EpisodeConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("bench: empty task list");
  const long fe_max = cfg.resolved_fe_max(tasks.front().dimension);
  for (const auto& t : tasks)
    if (cfg.resolved_fe_max(t.dimension) != fe_max)
      throw std::invalid_argument("bench: tasks resolve to different fe_max; set episode fe_max explicitly");
  return fe_max;
}

inline EcdfCurve run_ecdf(const OptimizerFactory& optimizer, const std::vector<Task>& tasks, const TargetSet& targets,
                          const EpisodeConfig& episode_config, int runs_per_task, Seed seed,
                          const BenchOptions& options = {}) {
  if (targets.size() == 0) throw std::invalid_argument("run_ecdf: empty target set");
  const long fe_max = common_fe_max(tasks, episode_config);
  const auto records = run_episodes(optimizer, tasks, episode_config, runs_per_task, seed, options.workers);
  return ecdf_from_first_hits(first_hits(records, targets), fe_max);
}

struct ErtRow {
  std::string task_id;
  double target = 0.0;
  ErtStats stats;
};

inline std::vector<ErtRow> ert_from_records(const std::vector<Task>& tasks,
                                            const std::vector<std::vector<RolloutRecord>>& records,
                                            const TargetSet& targets) {
  std::vector<ErtRow> rows;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (double target : targets.precisions())
      rows.push_back({tasks[t].task_id, target, estimate_for_target(records[t], target, records[t].front().fe_max)});
  return rows;
}

inline std::vector<ErtRow> ert_table(const OptimizerFactory& optimizer, const std::vector<Task>& tasks,
                                     const TargetSet& targets, const EpisodeConfig& episode_config, int runs_per_task,
                                     Seed seed, const BenchOptions& options = {}) {
  if (tasks.empty()) throw std::invalid_argument("ert_table: empty task list");
  const auto records = run_episodes(optimizer, tasks, episode_config, runs_per_task, seed, options.workers);
  return ert_from_records(tasks, records, targets);
}

/// Normalized area under the ECDF, trapezoidal in log(budget) over [1, fe_max].
inline double ecdf_auc(const EcdfCurve& c) {
  if (c.budgets.empty()) return 0.0;
  if (c.budgets.size() == 1) return c.fraction_solved.front();
  double area = 0.0;
  for (std::size_t k = 1; k < c.budgets.size(); ++k) {
    const double dx = std::log(static_cast<double>(c.budgets[k])) - std::log(static_cast<double>(c.budgets[k - 1]));
    area += 0.5 * (c.fraction_solved[k] + c.fraction_solved[k - 1]) * dx;
  }
  const double span = std::log(static_cast<double>(c.budgets.back())) - std::log(static_cast<double>(c.budgets.front()));
  return area / span;
}

struct NamedOptimizer {
  std::string name;
  OptimizerFactory factory;
  std::optional<int> lambda;  // overrides the episode lambda for this optimizer
};

struct ComparisonEntry {
  std::string name;
  EcdfCurve curve;
  double auc = 0.0;
  double final_fraction = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonEntry> entries;
};

inline ComparisonReport compare(const std::vector<NamedOptimizer>& optimizers, const std::vector<Task>& tasks,
                                const TargetSet& targets, const EpisodeConfig& episode_config, int runs_per_task,
                                Seed seed, const BenchOptions& options = {}) {
  if (optimizers.size() < 2) throw std::invalid_argument("compare: need at least two optimizers");
  ComparisonReport report;
  for (const auto& o : optimizers) {
    EpisodeConfig cfg = episode_config;
    if (o.lambda) cfg.lambda = *o.lambda;
    ComparisonEntry e;
    e.name = o.name;
    e.curve = run_ecdf(o.factory, tasks, targets, cfg, runs_per_task, seed, options);
    e.auc = ecdf_auc(e.curve);
    e.final_fraction = e.curve.final_fraction();
    report.entries.push_back(std::move(e));
  }
  return report;
}

inline void write_ecdf_header(std::ostream& os) { os << "optimizer,budget,fraction_solved,n_pairs\n"; }

inline void write_ecdf_rows(std::ostream& os, const std::string& name, const EcdfCurve& c) {
  for (std::size_t k = 0; k < c.budgets.size(); ++k)
    os << name << ',' << c.budgets[k] << ',' << format_double(c.fraction_solved[k]) << ',' << c.n_pairs << '\n';
}

inline void write_ert_header(std::ostream& os) {
  os << "optimizer,task_id,target,n_runs,n_success,p_hat,e_fe_succ_hat,expected_fe\n";
}

inline void write_ert_rows(std::ostream& os, const std::string& name, const std::vector<ErtRow>& rows) {
  for (const auto& r : rows) {
    os << name << ',' << r.task_id << ',' << format_double(r.target) << ',' << r.stats.n_runs << ','
       << r.stats.n_success << ',' << format_double(r.stats.p_hat) << ','
       << (r.stats.e_fe_succ_hat ? format_double(*r.stats.e_fe_succ_hat) : std::string()) << ','
       << format_double(r.stats.expected_fe) << '\n';
  }
}

inline void write_comparison_csv(std::ostream& os, const ComparisonReport& report) {
  write_ecdf_header(os);
  for (const auto& e : report.entries) write_ecdf_rows(os, e.name, e.curve);
}

inline void write_comparison_summary(std::ostream& os, const ComparisonReport& report) {
  os << "optimizer,auc,final_fraction\n";
  for (const auto& e : report.entries)
    os << e.name << ',' << format_double(e.auc) << ',' << format_double(e.final_fraction) << '\n';
}

}  // namespace lpbo
