#pragma once

// Task distribution: parameterized families of synthetic objectives with
// per-instance shift, rotation and value offset. Every task is evaluated on the
// normalized domain [-1, 1]^d.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lpbo/rng.hpp"

namespace lpbo {

enum class Family { Sphere, LinearSlope, Rastrigin, Schwefel, LunacekBiRastrigin, GriewankRosenbrock };

inline constexpr std::array<Family, 6> kAllFamilies = {
    Family::Sphere,   Family::LinearSlope,        Family::Rastrigin,
    Family::Schwefel, Family::LunacekBiRastrigin, Family::GriewankRosenbrock};

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::Sphere: return "Sphere";
    case Family::LinearSlope: return "LinearSlope";
    case Family::Rastrigin: return "Rastrigin";
    case Family::Schwefel: return "Schwefel";
    case Family::LunacekBiRastrigin: return "LunacekBiRastrigin";
    case Family::GriewankRosenbrock: return "GriewankRosenbrock";
  }
  return "?";
}

inline Family parse_family(std::string_view name) {
  for (auto f : kAllFamilies)
    if (to_string(f) == name) return f;
  throw std::invalid_argument("unknown function family '" + std::string(name) + "'");
}

// Half-width of the family's natural box [-w, w]^d.
inline double natural_half_width(Family f) { return f == Family::Schwefel ? 500.0 : 5.0; }

struct InstanceConfig {
  Seed instance_seed = 0;
  Eigen::VectorXd shift;     // optimum offset in normalized coordinates
  Eigen::MatrixXd rotation;  // orthogonal d x d
  double value_offset = 0.0;
};

struct Task {
  Family family = Family::Sphere;
  InstanceConfig config;
  int dimension = 0;
  double optimum_value = 0.0;
  std::string task_id;
};

enum class Split { Train, Validation, Test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val" || s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "' (expected train|val|test)");
}

struct TaskSuite {
  std::vector<Task> tasks;
  std::vector<Split> split;  // parallel to tasks

  std::vector<Task> tasks_in(Split s) const {
    std::vector<Task> out;
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (split[i] == s) out.push_back(tasks[i]);
    return out;
  }
  std::size_t count(Split s) const { return static_cast<std::size_t>(std::count(split.begin(), split.end(), s)); }
};

/// Haar-ish random orthogonal matrix: QR of a seeded Gaussian matrix with the
/// signs of R's diagonal folded into Q.
inline Eigen::MatrixXd random_orthogonal(int dimension, Seed seed) {
  if (dimension < 1) throw std::invalid_argument("random_orthogonal: dimension must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd g(dimension, dimension);
  for (int i = 0; i < dimension; ++i)
    for (int j = 0; j < dimension; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dimension; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

namespace detail {

inline constexpr double kSchwefelArgmin = 420.9687462275036;
inline constexpr double kSchwefelConstant = 418.9828872724339;

inline double linear_slope_coefficient(int i, int d) {
  return d == 1 ? 1.0 : std::pow(10.0, static_cast<double>(i) / (d - 1));
}

// Closed forms on the rotated, optimum-relative natural coordinates y
// (y = 0 is the optimum for every family except LinearSlope).
inline double raw_value(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& shift) {
  const auto d = static_cast<int>(y.size());
  const double dd = d;
  switch (family) {
    case Family::Sphere:
      return y.squaredNorm();

    case Family::LinearSlope: {
      // Slope signs point toward the shift corner; f = -sum s_i y_i.
      double f = 0.0;
      for (int i = 0; i < d; ++i) {
        const double s = (shift(i) < 0.0 ? -1.0 : 1.0) * linear_slope_coefficient(i, d);
        f -= s * y(i);
      }
      return f;
    }

    case Family::Rastrigin: {
      double f = 10.0 * dd;
      for (int i = 0; i < d; ++i) f += y(i) * y(i) - 10.0 * std::cos(2.0 * std::numbers::pi * y(i));
      return f;
    }

    case Family::Schwefel: {
      double f = kSchwefelConstant * dd;
      double penalty = 0.0;
      for (int i = 0; i < d; ++i) {
        const double z = y(i) + kSchwefelArgmin;
        f -= z * std::sin(std::sqrt(std::abs(z)));
        const double excess = std::abs(z) - 500.0;
        if (excess > 0.0) penalty += excess * excess;
      }
      return f + 1e4 * penalty;
    }

    case Family::LunacekBiRastrigin: {
      const double mu0 = 2.5;
      const double s = 1.0 - 1.0 / (2.0 * std::sqrt(dd + 20.0) - 8.2);
      const double mu1 = -std::sqrt((mu0 * mu0 - 1.0) / s);
      double a = 0.0, b = 0.0, c = 0.0;
      for (int i = 0; i < d; ++i) {
        const double u = y(i) + mu0;
        a += (u - mu0) * (u - mu0);
        b += (u - mu1) * (u - mu1);
        c += std::cos(2.0 * std::numbers::pi * y(i));
      }
      return std::min(a, dd + s * b) + 10.0 * (dd - c);
    }

    case Family::GriewankRosenbrock: {
      const double scale = std::max(1.0, std::sqrt(dd) / 8.0);
      Eigen::VectorXd z = (scale * y).array() + 1.0;
      if (d == 1) {
        const double t = (z(0) - 1.0) * (z(0) - 1.0);
        return 10.0 * (t / 4000.0 - std::cos(t)) + 10.0;
      }
      double f = 0.0;
      for (int i = 0; i + 1 < d; ++i) {
        const double t = 100.0 * (z(i) * z(i) - z(i + 1)) * (z(i) * z(i) - z(i + 1)) + (z(i) - 1.0) * (z(i) - 1.0);
        f += t / 4000.0 - std::cos(t);
      }
      return 10.0 / (dd - 1.0) * f + 10.0;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Objective value at x in [-1, 1]^d. Throws std::domain_error outside the box.
inline double evaluate(const Task& task, std::span<const double> x) {
  const int d = task.dimension;
  if (static_cast<int>(x.size()) != d)
    throw std::invalid_argument("evaluate: point has " + std::to_string(x.size()) + " coordinates, task has " +
                                std::to_string(d));
  for (int i = 0; i < d; ++i)
    if (!(x[i] >= -1.0 && x[i] <= 1.0))
      throw std::domain_error("evaluate: coordinate " + std::to_string(i) + " outside [-1, 1]");
  const double w = natural_half_width(task.family);
  Eigen::VectorXd diff(d);
  for (int i = 0; i < d; ++i) diff(i) = w * x[i] - w * task.config.shift(i);
  const Eigen::VectorXd y = task.config.rotation * diff;
  return detail::raw_value(task.family, y, task.config.shift) + task.config.value_offset;
}

inline double evaluate(const Task& task, const Eigen::VectorXd& x) {
  return evaluate(task, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Location of the global minimum in normalized coordinates.
inline Eigen::VectorXd optimum_location(const Task& task) {
  if (task.family != Family::LinearSlope) return task.config.shift;
  // f(x) = -s^T R (x - shift) w, minimized at the vertex x = sign(R^T s).
  const int d = task.dimension;
  Eigen::VectorXd s(d);
  for (int i = 0; i < d; ++i)
    s(i) = (task.config.shift(i) < 0.0 ? -1.0 : 1.0) * detail::linear_slope_coefficient(i, d);
  const Eigen::VectorXd a = task.config.rotation.transpose() * s;
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = a(i) < 0.0 ? -1.0 : 1.0;
  return x;
}

inline double optimum_value(const Task& task) { return task.optimum_value; }

namespace detail {

inline std::string make_task_id(Family f, int d, int instance) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_d%d_i%04d", std::string(to_string(f)).c_str(), d, instance);
  return buf;
}

}  // namespace detail

/// Builds a single task from its family, dimension and instance seed. Shifts
/// are uniform in (-0.8, 0.8) (LinearSlope: projected to the nearest corner);
/// offsets uniform in [-100, 100].
inline Task make_task(Family family, int dimension, Seed instance_seed, std::string task_id, bool rotate = true) {
  if (dimension < 1) throw std::invalid_argument("make_task: dimension must be >= 1");
  Task t;
  t.family = family;
  t.dimension = dimension;
  t.task_id = std::move(task_id);
  t.config.instance_seed = instance_seed;
  Rng rng(derive_seed(instance_seed, 0));
  t.config.shift.resize(dimension);
  for (int i = 0; i < dimension; ++i) t.config.shift(i) = rng.uniform(-0.8, 0.8);
  if (family == Family::LinearSlope)
    for (int i = 0; i < dimension; ++i) t.config.shift(i) = t.config.shift(i) < 0.0 ? -1.0 : 1.0;
  t.config.value_offset = rng.uniform(-100.0, 100.0);
  t.config.rotation = rotate ? random_orthogonal(dimension, derive_seed(instance_seed, 1))
                             : Eigen::MatrixXd::Identity(dimension, dimension);
  t.optimum_value = evaluate(t, optimum_location(t));
  return t;
}

/// Rebuilds f* after a caller edits a task's instance configuration by hand.
inline void refresh_optimum(Task& task) { task.optimum_value = evaluate(task, optimum_location(task)); }

/// Deterministic suite: per family, instances [0, n) are generated from
/// master_seed and split by index blocks (Train, then Validation, then Test).
inline TaskSuite make_suite(std::span<const Family> families, int dimension, int instances_per_family,
                            std::array<double, 3> split_ratio, Seed master_seed) {
  if (dimension < 1) throw std::invalid_argument("make_suite: dimension must be >= 1");
  if (families.empty()) throw std::invalid_argument("make_suite: empty family list");
  for (std::size_t i = 0; i < families.size(); ++i)
    for (std::size_t j = i + 1; j < families.size(); ++j)
      if (families[i] == families[j]) throw std::invalid_argument("make_suite: duplicate family in list");
  if (instances_per_family < 3) throw std::invalid_argument("make_suite: instances_per_family must be >= 3");
  for (double r : split_ratio)
    if (!(r >= 0.0)) throw std::invalid_argument("make_suite: split fractions must be non-negative");
  if (std::abs(split_ratio[0] + split_ratio[1] + split_ratio[2] - 1.0) > 1e-9)
    throw std::invalid_argument("make_suite: split fractions must sum to 1");

  const int n = instances_per_family;
  const int n_train = static_cast<int>(std::lround(split_ratio[0] * n));
  const int n_val = std::min(n - n_train, static_cast<int>(std::lround(split_ratio[1] * n)));

  TaskSuite suite;
  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    const Family f = families[fi];
    for (int i = 0; i < n; ++i) {
      const Seed s = derive_seed(master_seed, static_cast<std::uint64_t>(f), i);
      suite.tasks.push_back(make_task(f, dimension, s, detail::make_task_id(f, dimension, i)));
      suite.split.push_back(i < n_train ? Split::Train : i < n_train + n_val ? Split::Validation : Split::Test);
    }
  }
  return suite;
}

inline TaskSuite make_suite(std::initializer_list<Family> families, int dimension, int instances_per_family,
                            std::array<double, 3> split_ratio, Seed master_seed) {
  std::vector<Family> v(families);
  return make_suite(std::span<const Family>(v), dimension, instances_per_family, split_ratio, master_seed);
}

}  // namespace lpbo
