#include <cmath>

#include <gtest/gtest.h>

#include "shb/optimizers.hpp"
#include "shb/rng.hpp"

namespace shb {
namespace {

Vector random_phi(std::size_t d, Stream& s) {
  Vector phi(d);
  for (double& x : phi) x = s.normal();
  return phi;
}

TEST(Shb, FirstStepsFromRest) {
  auto s = ShbState::start({0.0, 0.0}, 0.9);
  s = shb_step(std::move(s), Vector{1.0, 0.0}, 1.0);
  EXPECT_EQ(s.theta, (Vector{1.0, 0.0}));
  s = shb_step(std::move(s), Vector{0.0, 0.0}, 1.0);
  EXPECT_DOUBLE_EQ(s.theta[0], 1.9);
  EXPECT_EQ(s.theta[1], 0.0);
  EXPECT_EQ(s.t, 2u);
}

TEST(Shb, ZeroMomentumIsSgd) {
  Stream rs(1);
  auto shb = ShbState::start({0.5, -1.0, 2.0}, 0.0);
  auto sgd = BaselineState::start(OptimizerKind::SGD, {0.5, -1.0, 2.0});
  for (int k = 0; k < 1000; ++k) {
    const Vector phi = random_phi(3, rs);
    const double a = 0.01 / (1.0 + k);
    shb = shb_step(std::move(shb), phi, a);
    sgd = baseline_step(std::move(sgd), phi, a);
    EXPECT_EQ(shb.theta, sgd.theta);
  }
}

TEST(Shb, VzFormMatchesDirectForm) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Stream rs(seed);
    Vector theta0 = random_phi(5, rs);
    auto direct = ShbState::start(theta0, 0.9);
    auto vz = ShbVzState::start(theta0, 0.9);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const Vector phi = random_phi(5, rs);
      const double a = 1e-2 / std::pow(1.0 + k / 200.0, 1.0);
      direct = shb_step(std::move(direct), phi, a);
      vz = shb_vz_step(std::move(vz), phi, a);
      const Vector th = vz.theta();
      for (std::size_t i = 0; i < 5; ++i) worst = std::max(worst, std::abs(th[i] - direct.theta[i]));
    }
    EXPECT_LE(worst, 1e-9);
  }
}

TEST(Shb, VzVelocityDecaysWithZeroDirection) {
  auto s = ShbVzState::start({1.0, 2.0}, 0.5);
  s = shb_vz_step(std::move(s), Vector{1.0, -1.0}, 1.0);
  const Vector z = s.z;
  const double v0 = s.v[0];
  for (int k = 1; k <= 10; ++k) {
    s = shb_vz_step(std::move(s), Vector{0.0, 0.0}, 1.0);
    EXPECT_DOUBLE_EQ(s.v[0], v0 * std::pow(0.5, k));
    EXPECT_EQ(s.z, z);
  }
}

TEST(Shb, VzWithZeroMomentumTracksTheta) {
  Stream rs(4);
  auto s = ShbVzState::start({0.1, 0.2}, 0.0);
  for (int k = 0; k < 100; ++k) {
    s = shb_vz_step(std::move(s), random_phi(2, rs), 0.1);
    EXPECT_EQ(s.theta(), s.z);
  }
}

TEST(Shb, RejectsBadInputs) {
  EXPECT_THROW(ShbState::start({0.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(ShbState::start({0.0}, -0.1), std::invalid_argument);
  auto s = ShbState::start({0.0}, 0.5);
  EXPECT_THROW(shb_step(s, Vector{1.0}, -1.0), std::invalid_argument);
  EXPECT_THROW(shb_step(s, Vector{1.0, 2.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(shb_step(s, Vector{std::nan("")}, 1.0), DivergenceError);
  EXPECT_THROW(shb_step(s, Vector{1e308}, 1e10), DivergenceError);
}

TEST(Nesterov, BaseCases) {
  EXPECT_EQ(nesterov_momentum_sequence(0), 0.0);
  EXPECT_EQ(nesterov_momentum_sequence(1), 0.0);
  EXPECT_DOUBLE_EQ(nesterov_lambda_next(1.0), (1.0 + std::sqrt(5.0)) / 2.0);
  // mu_2 = (lambda_2 - 1) / lambda_3, lambda_2 = golden ratio.
  const double l2 = (1.0 + std::sqrt(5.0)) / 2.0;
  EXPECT_DOUBLE_EQ(nesterov_momentum_sequence(2), (l2 - 1.0) / nesterov_lambda_next(l2));
}

TEST(Nesterov, IncreasesTowardOne) {
  double prev = nesterov_momentum_sequence(1);
  for (std::size_t t = 2; t < 2000; ++t) {
    const double mu = nesterov_momentum_sequence(t);
    EXPECT_GT(mu, prev);
    EXPECT_LT(mu, 1.0);
    prev = mu;
  }
  EXPECT_GT(prev, 0.99);
}

TEST(Baselines, SgdStep) {
  auto s = BaselineState::start(OptimizerKind::SGD, {1.0, 1.0});
  s = baseline_step(std::move(s), Vector{2.0, -4.0}, 0.25);
  EXPECT_EQ(s.theta, (Vector{1.5, 0.0}));
}

TEST(Baselines, RmspropAccumulatorFixedPoint) {
  auto s = BaselineState::start(OptimizerKind::RMSPROP, {0.0, 0.0});
  const Vector phi{3.0, -0.5};
  for (int k = 0; k < 5000; ++k) s = baseline_step(std::move(s), phi, 1e-3);
  EXPECT_NEAR(s.v[0], 9.0, 1e-12);
  EXPECT_NEAR(s.v[1], 0.25, 1e-12);
  const Vector before = s.theta;
  s = baseline_step(std::move(s), phi, 1e-3);
  EXPECT_NEAR(s.theta[0] - before[0], 1e-3, 1e-9);
  EXPECT_NEAR(s.theta[1] - before[1], -1e-3, 1e-9);
}

TEST(Baselines, AdamFirstStepIsSignStep) {
  for (auto kind : {OptimizerKind::ADAM, OptimizerKind::RMSPROP}) {
    auto s = BaselineState::start(kind, {0.0, 0.0, 0.0});
    s = baseline_step(std::move(s), Vector{5.0, -0.01, 0.0}, 0.1);
    if (kind == OptimizerKind::ADAM) {
      EXPECT_NEAR(s.theta[0], 0.1, 1e-8);
      EXPECT_NEAR(s.theta[1], -0.1, 1e-5);
    }
    EXPECT_EQ(s.theta[2], 0.0);
  }
}

TEST(Baselines, SecondMomentsNonnegative) {
  Stream rs(9);
  for (auto kind : {OptimizerKind::ADAM, OptimizerKind::NADAM, OptimizerKind::RMSPROP}) {
    auto s = BaselineState::start(kind, Vector(4, 0.0));
    for (int k = 0; k < 200; ++k) {
      s = baseline_step(std::move(s), random_phi(4, rs), 1e-3);
      for (double v : s.v) EXPECT_GE(v, 0.0);
    }
  }
}

TEST(Baselines, NesterovLooksAhead) {
  BaselineHyper h;
  h.mu = 0.5;
  auto s = BaselineState::start(OptimizerKind::NAG_F, {0.0}, h);
  s = baseline_step(std::move(s), Vector{1.0}, 1.0);
  EXPECT_EQ(s.theta[0], 1.0);
  EXPECT_EQ(s.query_point()[0], 1.5);
  auto n = BaselineState::start(OptimizerKind::NAG_S, {0.0});
  EXPECT_EQ(n.momentum(), 0.0);
  n = baseline_step(std::move(n), Vector{1.0}, 1.0);
  EXPECT_EQ(n.momentum(), nesterov_momentum_sequence(1));
}

TEST(Baselines, Validation) {
  BaselineHyper h;
  h.beta2 = 1.0;
  EXPECT_THROW(BaselineState::start(OptimizerKind::ADAM, {0.0}, h), std::invalid_argument);
  h = {};
  h.eps = 0.0;
  EXPECT_THROW(BaselineState::start(OptimizerKind::ADAM, {0.0}, h), std::invalid_argument);
  EXPECT_THROW(BaselineState::start(OptimizerKind::SHB, {0.0}), std::invalid_argument);
}

TEST(Optimizer, NamesRoundTrip) {
  for (auto k : {OptimizerKind::SHB, OptimizerKind::SHB_VZ, OptimizerKind::SGD, OptimizerKind::NAG_F,
                 OptimizerKind::NAG_S, OptimizerKind::ADAM, OptimizerKind::NADAM, OptimizerKind::RMSPROP}) {
    EXPECT_EQ(parse_optimizer(to_string(k)), k);
  }
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::ADAM);
  EXPECT_THROW(parse_optimizer("lbfgs"), std::invalid_argument);
}

TEST(Optimizer, DriverMatchesStateSteppers) {
  Stream rs(11);
  Optimizer a(OptimizerKind::SHB, {1.0, 2.0}, 0.9);
  Optimizer b(OptimizerKind::SHB_VZ, {1.0, 2.0}, 0.9);
  for (int k = 0; k < 100; ++k) {
    const Vector phi = random_phi(2, rs);
    a.step(phi, 0.01);
    b.step(phi, 0.01);
  }
  const Vector ta = a.theta();
  const Vector tb = b.theta();
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(ta[i], tb[i], 1e-12);
}

}  // namespace
}  // namespace shb
