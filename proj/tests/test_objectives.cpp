#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "shb/objectives.hpp"

namespace shb {
namespace {

TEST(Objectives, HilbertSingleEntryAtZero) {
  const auto obj = hilbert_block_objective(1, 1);
  const Vector theta{0.0};
  EXPECT_DOUBLE_EQ(obj.value(theta), 0.0);
}

TEST(Objectives, HilbertTwoByTwoHandValue) {
  const auto obj = hilbert_block_objective(1, 2);
  const Vector theta{1.0, 0.0};
  // 1 + log(e + 1)
  EXPECT_NEAR(obj.value(theta), 2.3132616875182228, 1e-14);
  const Vector g = obj.gradient(theta);
  EXPECT_NEAR(g[0], 2.7310585786300049, 1e-14);
  EXPECT_NEAR(g[1], 1.2689414213699951, 1e-14);
}

TEST(Objectives, HilbertTwoBlocksAgainstDense) {
  const auto obj = hilbert_block_objective(2, 3);
  EXPECT_EQ(obj.dim, 6u);
  const Vector theta{0.3, -1.2, 2.0, 0.5, -0.7, 1.1};
  EXPECT_NEAR(obj.value(theta), 3.1495080134194335, 1e-13);
}

TEST(Objectives, HilbertMillionDimension) {
  // Construction only; the matrix is never formed.
  const auto obj = hilbert_block_objective(100, 10000);
  EXPECT_EQ(obj.dim, 1000000u);
  ASSERT_TRUE(obj.infimum.has_value());
  EXPECT_NEAR(*obj.infimum, std::log(1e6) - 1.0 / 400.0, 1e-12);
}

TEST(Objectives, HilbertRejectsZeroDimension) {
  EXPECT_THROW(hilbert_block_objective(0, 3), std::invalid_argument);
  EXPECT_THROW(hilbert_block_objective(3, 0), std::invalid_argument);
}

TEST(Objectives, HilbertMatvecMatchesDense) {
  for (std::size_t b : {1, 2, 5, 8}) {
    const auto recip = detail::hilbert_reciprocals(b);
    Stream s(b);
    Vector x(b);
    for (double& v : x) v = s.normal();
    Vector y(b);
    detail::hilbert_matvec(recip, x, y);
    for (std::size_t i = 0; i < b; ++i) {
      double dense = 0.0;
      for (std::size_t j = 0; j < b; ++j) dense += x[j] / static_cast<double>(i + j + 1);
      EXPECT_NEAR(y[i], dense, 1e-12);
    }
  }
  // Full objective gradient on d = 64 (8 blocks of 8) against a dense product.
  const auto obj = hilbert_block_objective(8, 8);
  Stream s(99);
  Vector x(64);
  for (double& v : x) v = s.normal();
  const Vector g = obj.gradient(x);
  Vector p(64);
  detail::softmax(x, p);
  for (std::size_t i = 0; i < 64; ++i) {
    double dense = 0.0;
    for (std::size_t j = 0; j < 64; ++j) {
      if (i / 8 == j / 8) dense += x[j] / static_cast<double>(i % 8 + j % 8 + 1);
    }
    EXPECT_NEAR(g[i], 2.0 * dense + p[i], 1e-12);
  }
}

TEST(Objectives, LogSumExpIsOverflowSafe) {
  const auto obj = hilbert_block_objective(1, 4);
  const Vector big{1e4, -1e4, 1e4, -1e4};
  EXPECT_TRUE(std::isfinite(obj.value(big)));
  EXPECT_TRUE(all_finite(obj.gradient(big)));
  EXPECT_NEAR(detail::log_sum_exp(Vector{1e4, 1e4}), 1e4 + std::log(2.0), 1e-9);
}

TEST(Objectives, HilbertInfimumIsBelowSampledValues) {
  const auto obj = hilbert_block_objective(2, 2);
  ASSERT_TRUE(obj.infimum.has_value());
  // Independent solve (reduced problem, L-BFGS, then refined).
  EXPECT_NEAR(*obj.infimum, 1.306657362603369, 1e-9);
  for (const auto& x : default_samples(4)) EXPECT_GE(obj.value(x), *obj.infimum);
}

TEST(Objectives, HilbertDeskScaleInfimum) {
  const auto obj = hilbert_block_objective(100, 100);
  EXPECT_NEAR(*obj.infimum, 9.210247793411199, 1e-9);
  EXPECT_GE(*obj.infimum, std::log(1e4) - 1.0 / 400.0);
}

TEST(Objectives, Example31Values) {
  const auto obj = example31_objective();
  EXPECT_NEAR(obj.value(Vector{1.0}), 1.0, 1e-15);
  EXPECT_NEAR(obj.value(Vector{-1.0}), 1.0, 1e-15);
  EXPECT_NEAR(obj.value(Vector{3.0}), 1.0, 1e-15);
  // The J = 0 global minima.
  for (double m : {-4.0, 0.0, 4.0}) {
    EXPECT_NEAR(obj.value(Vector{m}), 0.0, 1e-15);
    EXPECT_NEAR(obj.gradient(Vector{m})[0], 0.0, 1e-15);
  }
  EXPECT_DOUBLE_EQ(*obj.infimum, 0.0);
  EXPECT_NEAR(obj.lipschitz, std::numbers::pi * std::numbers::pi / 2.0, 1e-15);
}

TEST(Objectives, Example31ContinuousAtFive) {
  const auto obj = example31_objective();
  for (double x : {5.0, -5.0}) {
    const double sign = x > 0 ? 1.0 : -1.0;
    EXPECT_NEAR(obj.value(Vector{x - sign * 1e-12}), obj.value(Vector{x + sign * 1e-12}), 1e-9);
    EXPECT_NEAR(obj.gradient(Vector{x - sign * 1e-12})[0], obj.gradient(Vector{x + sign * 1e-12})[0], 1e-9);
  }
}

TEST(Objectives, Example31NeverBelowInfimum) {
  const auto obj = example31_objective();
  for (double x = -50.0; x <= 50.0; x += 0.01) EXPECT_GE(obj.value(Vector{x}), 0.0);
}

TEST(Objectives, QuadraticExamples) {
  const auto one = strongly_convex_quadratic(1, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(one.value(Vector{2.0}), 2.0);
  EXPECT_DOUBLE_EQ(one.gradient(Vector{2.0})[0], 2.0);
  const auto two = strongly_convex_quadratic(2, 1.0, 3.0);
  EXPECT_DOUBLE_EQ(two.value(Vector{1.0, 1.0}), 2.0);
  EXPECT_DOUBLE_EQ(two.lipschitz, 3.0);
  EXPECT_DOUBLE_EQ(*two.strong_convexity, 1.0);
  EXPECT_THROW(strongly_convex_quadratic(2, 3.0, 1.0), std::invalid_argument);
}

TEST(Objectives, QuadraticGradientBoundedBySuboptimality) {
  const auto obj = strongly_convex_quadratic(5, 0.5, 4.0);
  for (const auto& x : default_samples(5, 3)) {
    EXPECT_LE(norm_sq(obj.gradient(x)), 2.0 * obj.lipschitz * obj.suboptimality(x) * (1 + 1e-12));
  }
}

TEST(Objectives, GradientsMatchFiniteDifferences) {
  const std::vector<ObjectiveSpec> objs{hilbert_block_objective(2, 3), example31_objective(),
                                        strongly_convex_quadratic(4, 1.0, 3.0), linear_objective({1.0, -2.0})};
  for (const auto& obj : objs) {
    Stream s = Stream::derive(7, obj.dim, Purpose::Sampling);
    const auto pts = sample_points(obj.dim, 100, 3.0, s);
    for (const auto& x : pts) {
      const Vector g = obj.gradient(x);
      const Vector fd = finite_difference_gradient(obj, x, 1e-6);
      const double scale = std::max(1.0, norm(g));
      EXPECT_LE(norm(subtract(g, fd)) / scale, 1e-5) << obj.name;
    }
  }
}

TEST(Objectives, AssumptionJ1) {
  const auto obj = strongly_convex_quadratic(2, 1.0, 3.0);
  Stream s(5);
  const auto pts = sample_points(2, 100, 10.0, s);
  EXPECT_TRUE(check_assumption_j1(obj, 6.0, pts).holds);
  EXPECT_FALSE(check_assumption_j1(obj, 0.0, pts).holds);
  const auto at_min = check_assumption_j1(obj, 6.0, std::vector<Vector>{Vector{0.0, 0.0}});
  EXPECT_TRUE(at_min.holds);
  EXPECT_EQ(at_min.worst, 0.0);
}

TEST(Objectives, AssumptionJ1NeedsInfimum) {
  EXPECT_THROW(check_assumption_j1(linear_objective({1.0}), 1.0, std::vector<Vector>{Vector{1.0}}), std::logic_error);
}

TEST(Objectives, AssumptionJ2) {
  const auto obj = strongly_convex_quadratic(3, 1.0, 3.0);
  const double r = *obj.strong_convexity;
  const ClassBFunction eta{[r](double x) { return std::sqrt(2.0 * r * x); }};
  EXPECT_TRUE(check_assumption_j2(obj, eta, default_samples(3)).holds);
  EXPECT_TRUE(check_assumption_j2(obj, eta, std::vector<Vector>{Vector{0.0, 0.0, 0.0}}).holds);

  // Jbar = 4 with |grad| = 1 breaks eta(r) = r.
  ObjectiveSpec fake = constant_objective(1, 4.0);
  fake.infimum = 0.0;
  fake.grad = [](std::span<const double>, std::span<double> out) { out[0] = 1.0; };
  const ClassBFunction identity{[](double x) { return x; }};
  EXPECT_FALSE(check_assumption_j2(fake, identity, std::vector<Vector>{Vector{0.0}}).holds);
}

TEST(Objectives, ClassBPlausibility) {
  const ClassBFunction root{[](double x) { return std::sqrt(x); }};
  const std::vector<std::pair<double, double>> ranges{{0.1, 1.0}, {1e-3, 10.0}};
  EXPECT_TRUE(root.plausible_on(ranges));
  const ClassBFunction zero{[](double) { return 0.0; }};
  EXPECT_FALSE(zero.plausible_on(ranges));
}

TEST(Objectives, LipschitzEstimates) {
  Stream s(11);
  const double quad = estimate_lipschitz(strongly_convex_quadratic(2, 1.0, 3.0), 5.0, 2000, s);
  EXPECT_LE(quad, 3.0 + 1e-9);
  EXPECT_GE(quad, 2.9);
  EXPECT_EQ(estimate_lipschitz(constant_objective(3, 1.0), 5.0, 100, s), 0.0);

  const auto h = hilbert_block_objective(1, 2);
  const double lh = estimate_lipschitz(h, 5.0, 2000, s);
  const double lambda = 1.2675918792439982;
  EXPECT_NEAR(h.lipschitz, 2.0 * lambda + 0.5, 1e-12);
  EXPECT_LE(lh, h.lipschitz);
  // The tighter 2 lambda + 1/4 also holds here: sup of the Hessian norm is 2.5868.
  EXPECT_LE(lh, 2.0 * lambda + 0.25);
}

}  // namespace
}  // namespace shb
