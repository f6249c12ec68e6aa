// Copyright 2026 The ebplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ebplan/envs.h"
#include "ebplan/errors.h"
#include "test_util.h"

namespace ebplan {
namespace {

using ::ebplan::testing::CentralDifference;
using ::ebplan::testing::MaxRelativeError;

std::vector<double> Action(const Environment& env, std::mt19937_64& rng) {
  const EnvSpec& s = env.spec();
  std::vector<double> a(s.action_dim);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::uniform_real_distribution<double>(s.action_low[i], s.action_high[i])(rng);
  }
  return a;
}

TEST(WrapAngleTest, HalfOpenInterval) {
  EXPECT_EQ(WrapAngle(-std::numbers::pi), std::numbers::pi);
  EXPECT_EQ(WrapAngle(std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(WrapAngle(3 * std::numbers::pi), std::numbers::pi, 1e-15);
  EXPECT_NEAR(WrapAngle(0.5 + 4 * std::numbers::pi), 0.5, 1e-14);
}

TEST(EnvRegistryTest, MakesEveryEnvironmentByName) {
  for (const std::string& name : EnvironmentNames()) {
    auto env = MakeEnvironment(name);
    EXPECT_EQ(env->spec().name, name);
    EXPECT_NO_THROW(env->spec().Validate());
  }
  EXPECT_THROW(MakeEnvironment("half_cheetah"), ConfigError);
}

TEST(EnvSpecTest, RejectsBadBounds) {
  EnvSpec s{"x", 1, 1, {1.0}, {1.0}, 10, 0.1};
  EXPECT_THROW(s.Validate(), ConfigError);
  s.action_high = {INFINITY};
  EXPECT_THROW(s.Validate(), ConfigError);
  s.action_high = {2.0};
  s.episode_length = 0;
  EXPECT_THROW(s.Validate(), ConfigError);
}

// ---------------------------------------------------------------- reset --

TEST(ResetTest, PendulumIsDeterministicAndHangsDown) {
  PendulumEnv env;
  EXPECT_EQ(env.Reset(7), env.Reset(7));
  EXPECT_NE(env.Reset(7).x, env.Reset(8).x);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EnvState s = env.Reset(seed);
    EXPECT_EQ(s.step, 0);
    double theta = std::atan2(s.x[1], s.x[0]);
    EXPECT_LE(std::abs(WrapAngle(theta - std::numbers::pi)), PendulumEnv::kInitJitter);
    EXPECT_LE(std::abs(s.x[2]), PendulumEnv::kInitJitter);
  }
}

TEST(ResetTest, PointMassStartsInBoxAtRest) {
  PointMassEnv env;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EnvState s = env.Reset(seed);
    EXPECT_LE(std::abs(s.x[0]), PointMassEnv::kStartBox);
    EXPECT_LE(std::abs(s.x[1]), PointMassEnv::kStartBox);
    EXPECT_EQ(s.x[2], 0.0);
    EXPECT_EQ(s.x[3], 0.0);
  }
}

TEST(ResetTest, CartpolePoleHangsDownWithJitter) {
  CartpoleEnv env;
  EXPECT_EQ(env.Reset(3), env.Reset(3));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EnvState s = env.Reset(seed);
    double theta = std::atan2(s.x[2], s.x[1]);
    EXPECT_LE(std::abs(WrapAngle(theta - std::numbers::pi)), CartpoleEnv::kInitJitter);
  }
}

// ----------------------------------------------------------------- step --

TEST(StepTest, PendulumHangingAtRestIsFixedPoint) {
  PendulumEnv env;
  EnvState s{{-1.0, 0.0, 0.0}, 0, false};
  for (int k = 0; k < 200; ++k) s = env.Step(s, std::vector<double>{0.0});
  EXPECT_NEAR(s.x[0], -1.0, 1e-12);
  EXPECT_NEAR(s.x[1], 0.0, 1e-12);
  EXPECT_NEAR(s.x[2], 0.0, 1e-12);
  EXPECT_EQ(s.step, 200);
}

TEST(StepTest, PointMassMatchesClosedFormKinematics) {
  PointMassEnv env;
  const double dt = PointMassEnv::kDt;
  const std::vector<double> force = {1.0, -1.0};
  EnvState s{{0.3, -0.2, 0.0, 0.0}, 0, false};
  for (int k = 1; k <= 50; ++k) {
    s = env.Step(s, force);
    // v_k = k dt F / m, p_k = p_0 + dt^2 F / m * k (k + 1) / 2
    const double v = k * dt;
    const double p = dt * dt * k * (k + 1) / 2.0;
    EXPECT_NEAR(s.x[0], 0.3 + p, 1e-9);
    EXPECT_NEAR(s.x[1], -0.2 - p, 1e-9);
    EXPECT_NEAR(s.x[2], v, 1e-9);
    EXPECT_NEAR(s.x[3], -v, 1e-9);
  }
}

// Semi-implicit Euler does not conserve the mechanical energy exactly within
// a swing, so dissipation is checked where it is sharp: at the turning points
// (velocity sign changes), where the energy is purely potential.
TEST(StepTest, PendulumEnergyDissipatesAcrossSwings) {
  PendulumEnv env;
  const double theta0 = 2.0;
  EnvState s{{std::cos(theta0), std::sin(theta0), 0.0}, 0, false};
  std::vector<double> turning;
  double previous_dot = 0.0;
  for (int k = 0; k < 4000; ++k) {
    s = env.Step(s, std::vector<double>{0.0});
    if (k > 0 && previous_dot * s.x[2] < 0.0) {
      turning.push_back(PendulumEnv::MechanicalEnergy(std::atan2(s.x[1], s.x[0]), s.x[2]));
    }
    previous_dot = s.x[2];
  }
  ASSERT_GE(turning.size(), 10u);
  for (std::size_t i = 1; i < turning.size(); ++i) {
    EXPECT_LE(turning[i], turning[i - 1] + 1e-12) << "turning point " << i;
  }
  EXPECT_LT(turning.back(), 0.5 * PendulumEnv::MechanicalEnergy(theta0, 0.0));
}

TEST(StepTest, OutOfRangeActionIsClippedAndFlagged) {
  PendulumEnv env;
  EnvState s = env.Reset(1);
  EnvState clipped = env.Step(s, std::vector<double>{5.0});
  EnvState bound = env.Step(s, std::vector<double>{2.0});
  EXPECT_TRUE(clipped.action_clipped);
  EXPECT_FALSE(bound.action_clipped);
  EXPECT_EQ(clipped.x, bound.x);
}

TEST(StepTest, NonFiniteActionRejected) {
  PendulumEnv env;
  EXPECT_THROW(env.Step(env.Reset(0), std::vector<double>{NAN}), NumericError);
  EXPECT_THROW(env.Step(env.Reset(0), std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST(StepTest, EpisodesReproduceBitwiseAndKeepUnitTrig) {
  for (const std::string& name : EnvironmentNames()) {
    auto env = MakeEnvironment(name);
    auto run = [&] {
      std::mt19937_64 rng(5);
      std::vector<EnvState> states = {env->Reset(5)};
      for (int t = 0; t < env->spec().episode_length; ++t) {
        states.push_back(env->Step(states.back(), Action(*env, rng)));
      }
      return states;
    };
    std::vector<EnvState> a = run(), b = run();
    EXPECT_EQ(a, b) << name;
    if (name == "pendulum") {
      for (const EnvState& s : a) EXPECT_NEAR(s.x[0] * s.x[0] + s.x[1] * s.x[1], 1.0, 1e-9);
    }
    if (name == "cartpole") {
      for (const EnvState& s : a) EXPECT_NEAR(s.x[1] * s.x[1] + s.x[2] * s.x[2], 1.0, 1e-9);
    }
  }
}

// --------------------------------------------------------------- reward --

TEST(RewardTest, PendulumUprightIsGlobalMaximum) {
  PendulumEnv env;
  EXPECT_EQ(env.Reward(std::vector<double>{1.0, 0.0, 0.0}, std::vector<double>{0.0}), 0.0);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    double th = std::uniform_real_distribution<double>(-4, 4)(rng);
    std::vector<double> x = {std::cos(th), std::sin(th), th};
    EXPECT_LE(env.Reward(x, Action(env, rng)), 0.0);
  }
}

TEST(RewardTest, PendulumHangingDownIsMinusPiSquared) {
  PendulumEnv env;
  const std::vector<double> down = {std::cos(std::numbers::pi), std::sin(std::numbers::pi), 0.0};
  EXPECT_DOUBLE_EQ(env.Reward(down, std::vector<double>{0.0}),
                   -std::numbers::pi * std::numbers::pi);
}

TEST(RewardTest, PointMassAtGoalIsZero) {
  PointMassEnv env;
  EXPECT_EQ(env.Reward(std::vector<double>{0, 0, 0, 0}, std::vector<double>{0, 0}), 0.0);
}

TEST(RewardTest, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (const std::string& name : EnvironmentNames()) {
    auto env = MakeEnvironment(name);
    const std::size_t ds = env->spec().state_dim, da = env->spec().action_dim;
    EnvState s = env->Reset(3);
    for (int t = 0; t < 7; ++t) s = env->Step(s, Action(*env, rng));
    std::vector<double> a = Action(*env, rng);
    std::vector<double> gx(ds), ga(da);
    env->RewardGradient(s.x, a, gx, ga);
    auto fx = CentralDifference([&](const std::vector<double>& x) { return env->Reward(x, a); },
                                s.x, 1e-6);
    auto fa = CentralDifference(
        [&](const std::vector<double>& u) { return env->Reward(s.x, u); }, a, 1e-6);
    EXPECT_LE(MaxRelativeError(gx, fx), 1e-6) << name;
    EXPECT_LE(MaxRelativeError(ga, fa), 1e-6) << name;
  }
}

// --------------------------------------------------------------- oracle --

TEST(OracleTest, RolloutEqualsRepeatedStep) {
  std::mt19937_64 rng(4);
  for (const std::string& name : EnvironmentNames()) {
    auto env = MakeEnvironment(name);
    OracleDynamics oracle(*env);
    const std::size_t da = env->spec().action_dim;
    Tensor actions(30, da);
    for (std::size_t t = 0; t < 30; ++t) {
      std::vector<double> a = Action(*env, rng);
      std::copy(a.begin(), a.end(), actions.row(t).begin());
    }
    EnvState s = env->Reset(11);
    Tensor predicted = Rollout(oracle, s.x, actions);
    for (std::size_t t = 0; t < 30; ++t) {
      s = env->Step(s, actions.row(t));
      EXPECT_TRUE(std::equal(s.x.begin(), s.x.end(), predicted.row(t).begin())) << name;
    }
  }
}

TEST(OracleTest, VarianceIsZero) {
  PendulumEnv env;
  OracleDynamics oracle(env);
  Prediction p = oracle.Predict(env.Reset(0).x, std::vector<double>{1.0});
  for (double v : p.variance) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(p.mean, env.Step(env.Reset(0), std::vector<double>{1.0}).x);
}

TEST(OracleTest, SingleActionRolloutGivesOneState) {
  PointMassEnv env;
  OracleDynamics oracle(env);
  Tensor out = Rollout(oracle, env.Reset(0).x, Tensor(1, 2));
  EXPECT_EQ(out.rows(), 1u);
}

}  // namespace
}  // namespace ebplan
