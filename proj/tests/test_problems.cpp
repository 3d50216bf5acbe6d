#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "lpbo/problems.hpp"
#include "oracles.hpp"

using namespace lpbo;

namespace {

std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> r(static_cast<std::size_t>(m.rows()), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd random_point(Rng& rng, int d) {
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = rng.uniform(-1.0, 1.0);
  return x;
}

Task plain_task(Family f, int d) {
  Task t = make_task(f, d, 1, "t", false);
  t.config.shift = Eigen::VectorXd::Zero(d);
  t.config.value_offset = 0.0;
  refresh_optimum(t);
  return t;
}

}  // namespace

TEST(MakeSuite, TenTenEightySplit) {
  const auto s = make_suite({Family::Sphere}, 2, 1000, {0.1, 0.1, 0.8}, 7);
  EXPECT_EQ(s.tasks.size(), 1000u);
  EXPECT_EQ(s.count(Split::Train), 100u);
  EXPECT_EQ(s.count(Split::Validation), 100u);
  EXPECT_EQ(s.count(Split::Test), 800u);
  // Index blocks: Train, then Validation, then Test.
  EXPECT_EQ(s.split[99], Split::Train);
  EXPECT_EQ(s.split[100], Split::Validation);
  EXPECT_EQ(s.split[200], Split::Test);
}

TEST(MakeSuite, DegenerateSplit) {
  const auto s = make_suite({Family::Sphere}, 2, 10, {1.0, 0.0, 0.0}, 0);
  EXPECT_EQ(s.count(Split::Train), 10u);
  EXPECT_EQ(s.count(Split::Validation), 0u);
  EXPECT_EQ(s.count(Split::Test), 0u);
}

TEST(MakeSuite, Deterministic) {
  const auto a = make_suite({Family::Rastrigin, Family::LinearSlope}, 3, 20, {0.5, 0.25, 0.25}, 99);
  const auto b = make_suite({Family::Rastrigin, Family::LinearSlope}, 3, 20, {0.5, 0.25, 0.25}, 99);
  ASSERT_EQ(a.tasks.size(), b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    EXPECT_EQ(a.tasks[i].task_id, b.tasks[i].task_id);
    EXPECT_EQ(a.tasks[i].config.instance_seed, b.tasks[i].config.instance_seed);
    EXPECT_TRUE(a.tasks[i].config.shift == b.tasks[i].config.shift);
    EXPECT_TRUE(a.tasks[i].config.rotation == b.tasks[i].config.rotation);
    EXPECT_EQ(a.tasks[i].config.value_offset, b.tasks[i].config.value_offset);
    EXPECT_EQ(a.tasks[i].optimum_value, b.tasks[i].optimum_value);
  }
}

TEST(MakeSuite, DistinctInstanceSeedsAndShiftsInside) {
  const auto s = make_suite(std::span<const Family>(kAllFamilies), 4, 50, {0.2, 0.2, 0.6}, 3);
  std::set<Seed> seeds;
  for (const auto& t : s.tasks) {
    seeds.insert(t.config.instance_seed);
    for (int i = 0; i < t.dimension; ++i) {
      if (t.family == Family::LinearSlope)
        EXPECT_EQ(std::abs(t.config.shift(i)), 1.0);
      else
        EXPECT_LT(std::abs(t.config.shift(i)), 1.0);
    }
    EXPECT_GE(t.config.value_offset, -100.0);
    EXPECT_LE(t.config.value_offset, 100.0);
  }
  EXPECT_EQ(seeds.size(), s.tasks.size());
}

TEST(MakeSuite, Errors) {
  EXPECT_THROW(make_suite({Family::Sphere}, 0, 10, {1, 0, 0}, 0), std::invalid_argument);
  EXPECT_THROW(make_suite(std::span<const Family>{}, 2, 10, {1, 0, 0}, 0), std::invalid_argument);
  EXPECT_THROW(make_suite({Family::Sphere}, 2, 2, {1, 0, 0}, 0), std::invalid_argument);
  EXPECT_THROW(make_suite({Family::Sphere}, 2, 10, {0.5, 0.1, 0.1}, 0), std::invalid_argument);
}

TEST(Evaluate, SphereAtOrigin) {
  const Task t = plain_task(Family::Sphere, 3);
  EXPECT_EQ(evaluate(t, Eigen::VectorXd::Zero(3)), 0.0);
  EXPECT_EQ(optimum_value(t), 0.0);
}

TEST(Evaluate, OutsideDomainIsAnError) {
  const Task t = plain_task(Family::Sphere, 2);
  EXPECT_THROW(evaluate(t, Eigen::Vector2d(1.0000001, 0.0)), std::domain_error);
  EXPECT_THROW(evaluate(t, Eigen::Vector2d(std::nan(""), 0.0)), std::domain_error);
  EXPECT_NO_THROW(evaluate(t, Eigen::Vector2d(1.0, -1.0)));
}

TEST(Evaluate, LinearSlopeCornerBeatsInterior) {
  Task t = make_task(Family::LinearSlope, 2, 5, "ls", false);
  t.config.shift = Eigen::Vector2d(-1.0, -1.0);
  refresh_optimum(t);
  const double corner = evaluate(t, Eigen::Vector2d(-1.0, -1.0));
  EXPECT_EQ(corner, optimum_value(t));
  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    Eigen::Vector2d x(rng.uniform(-0.999, 0.999), rng.uniform(-0.999, 0.999));
    EXPECT_LT(corner, evaluate(t, x));
  }
}

TEST(Evaluate, LinearSlopeOptimumIsBestVertex) {
  // Brute force over all vertices of the box.
  for (Seed s = 0; s < 20; ++s) {
    const Task t = make_task(Family::LinearSlope, 3, s, "ls");
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < 8; ++mask) {
      Eigen::Vector3d v;
      for (int i = 0; i < 3; ++i) v(i) = (mask >> i & 1) ? 1.0 : -1.0;
      best = std::min(best, evaluate(t, v));
    }
    EXPECT_EQ(optimum_value(t), best);
  }
}

TEST(Evaluate, SchwefelMatchesOracleAtOptimum) {
  const Task t = make_task(Family::Schwefel, 2, 1234, "sw");
  const auto rot = to_rows(t.config.rotation);
  const auto shift = to_std(t.config.shift);
  const double at_opt = oracle::schwefel(rot, shift, t.config.value_offset, shift);
  EXPECT_NEAR(at_opt, optimum_value(t), 1e-6);
  EXPECT_NEAR(evaluate(t, t.config.shift), optimum_value(t), 1e-9);
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const auto x = random_point(rng, 2);
    EXPECT_NEAR(evaluate(t, x), oracle::schwefel(rot, shift, t.config.value_offset, to_std(x)), 1e-8);
  }
}

TEST(Evaluate, GriewankRosenbrockMatchesOracle) {
  const Task t = make_task(Family::GriewankRosenbrock, 4, 77, "gr");
  const auto rot = to_rows(t.config.rotation);
  const auto shift = to_std(t.config.shift);
  EXPECT_NEAR(oracle::griewank_rosenbrock(rot, shift, t.config.value_offset, shift), optimum_value(t), 1e-9);
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const auto x = random_point(rng, 4);
    EXPECT_NEAR(evaluate(t, x), oracle::griewank_rosenbrock(rot, shift, t.config.value_offset, to_std(x)), 1e-9);
  }
}

TEST(Evaluate, OffsetShiftsOptimumValue) {
  Task t = plain_task(Family::Sphere, 2);
  t.config.value_offset = 3.5;
  refresh_optimum(t);
  EXPECT_EQ(optimum_value(t), 3.5);
}

TEST(Evaluate, NeverBelowOptimum) {
  const auto s = make_suite(std::span<const Family>(kAllFamilies), 3, 10, {1, 0, 0}, 21);
  Rng rng(5);
  for (const auto& t : s.tasks) {
    for (int k = 0; k < 1000; ++k) EXPECT_GE(evaluate(t, random_point(rng, 3)), optimum_value(t) - 1e-9) << t.task_id;
    // Optimum location is known for every family.
    EXPECT_NEAR(evaluate(t, optimum_location(t)), optimum_value(t), 1e-9);
  }
}

TEST(Evaluate, Pure) {
  const Task t = make_task(Family::LunacekBiRastrigin, 5, 8, "lbr");
  Rng rng(6);
  const auto x = random_point(rng, 5);
  const double first = evaluate(t, x);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(evaluate(t, x), first);
}

TEST(Evaluate, SphereRotationInvariant) {
  Rng rng(9);
  Task a = plain_task(Family::Sphere, 4);
  for (Seed s = 0; s < 10; ++s) {
    Task b = a;
    b.config.rotation = random_orthogonal(4, s);
    for (int k = 0; k < 50; ++k) {
      const auto x = random_point(rng, 4);
      EXPECT_NEAR(evaluate(a, x), evaluate(b, x), 1e-9);
    }
  }
}

TEST(RandomOrthogonal, OneByOne) {
  for (Seed s = 0; s < 10; ++s) {
    const auto r = random_orthogonal(1, s);
    EXPECT_EQ(std::abs(r(0, 0)), 1.0);
  }
}

TEST(RandomOrthogonal, Orthogonality) {
  const auto r = random_orthogonal(5, 42);
  EXPECT_LT((r.transpose() * r - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(random_orthogonal(5, 42) == r);
}

TEST(RandomOrthogonal, DeterminantIsPlusMinusOne) {
  for (Seed s = 0; s < 20; ++s) {
    const double det = oracle::determinant(to_rows(random_orthogonal(3, s)));
    EXPECT_NEAR(std::abs(det), 1.0, 1e-9);
  }
}

TEST(Family, NamesRoundTrip) {
  for (auto f : kAllFamilies) EXPECT_EQ(parse_family(to_string(f)), f);
  EXPECT_THROW(parse_family("Ackley"), std::invalid_argument);
}
