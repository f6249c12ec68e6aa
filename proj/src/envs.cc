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

#include "ebplan/envs.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ebplan/errors.h"

namespace ebplan {
namespace {

EnvSpec MakeSpec(std::string name, std::size_t state_dim, double bound,
                 std::size_t action_dim, int episode_length, double dt) {
  EnvSpec spec{std::move(name),
               state_dim,
               action_dim,
               std::vector<double>(action_dim, -bound),
               std::vector<double>(action_dim, bound),
               episode_length,
               dt};
  spec.Validate();
  return spec;
}

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Wrapped angle of a (cos, sin) pair and its partial derivatives.
struct TrigAngle {
  double angle;
  double d_cos;
  double d_sin;
};

TrigAngle AngleOf(double c, double s) {
  const double r2 = c * c + s * s;
  return {WrapAngle(std::atan2(s, c)), -s / r2, c / r2};
}

}  // namespace

double WrapAngle(double angle) {
  double a = std::remainder(angle, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

void EnvSpec::Validate() const {
  if (state_dim == 0 || action_dim == 0) {
    throw ConfigError("environment dimensions must be positive");
  }
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw ConfigError("action bounds must have one entry per action dimension");
  }
  for (std::size_t i = 0; i < action_dim; ++i) {
    if (!std::isfinite(action_low[i]) || !std::isfinite(action_high[i]) ||
        !(action_low[i] < action_high[i])) {
      throw ConfigError("action bounds must be finite with low < high");
    }
  }
  if (episode_length < 1) throw ConfigError("episode length must be >= 1");
}

bool Environment::ClipAction(std::span<double> action) const {
  const EnvSpec& s = spec();
  bool clipped = false;
  for (std::size_t i = 0; i < s.action_dim; ++i) {
    double c = std::clamp(action[i], s.action_low[i], s.action_high[i]);
    clipped |= c != action[i];
    action[i] = c;
  }
  return clipped;
}

EnvState Environment::Step(const EnvState& state,
                           std::span<const double> action) const {
  const EnvSpec& s = spec();
  if (state.x.size() != s.state_dim || action.size() != s.action_dim) {
    throw ShapeError(s.name + ": state or action has the wrong width");
  }
  for (double a : action) {
    if (!std::isfinite(a)) throw NumericError(s.name + ": non-finite action");
  }
  std::vector<double> a(action.begin(), action.end());
  EnvState next;
  next.action_clipped = ClipAction(a);
  next.x.resize(s.state_dim);
  Integrate(state.x, a, next.x);
  next.step = state.step + 1;
  return next;
}

// ------------------------------------------------------------- pendulum --

PendulumEnv::PendulumEnv()
    : spec_(MakeSpec("pendulum", 3, kMaxTorque, 1, kEpisodeLength, kDt)) {}

EnvState PendulumEnv::Reset(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const double theta = WrapAngle(std::numbers::pi + Uniform(rng, -kInitJitter, kInitJitter));
  const double theta_dot = Uniform(rng, -kInitJitter, kInitJitter);
  return EnvState{{std::cos(theta), std::sin(theta), theta_dot}, 0, false};
}

// th_ddot = 3g/(2l) sin th + 3/(m l^2) (u - b th_dot), a uniform rod pivoting
// at one end; semi-implicit Euler with the speed clamped to kMaxSpeed.
void PendulumEnv::Integrate(std::span<const double> x, std::span<const double> action,
                            std::span<double> next) const {
  const double theta = std::atan2(x[1], x[0]);
  const double theta_dot = x[2];
  const double accel = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta) +
                       3.0 / (kMass * kLength * kLength) * (action[0] - kDamping * theta_dot);
  const double new_dot = std::clamp(theta_dot + kDt * accel, -kMaxSpeed, kMaxSpeed);
  const double new_theta = theta + kDt * new_dot;
  next[0] = std::cos(new_theta);
  next[1] = std::sin(new_theta);
  next[2] = new_dot;
}

double PendulumEnv::Reward(std::span<const double> x,
                           std::span<const double> action) const {
  const double theta = AngleOf(x[0], x[1]).angle;
  return -(theta * theta + 0.1 * x[2] * x[2] + 0.001 * action[0] * action[0]);
}

void PendulumEnv::RewardGradient(std::span<const double> x,
                                 std::span<const double> action,
                                 std::span<double> grad_x,
                                 std::span<double> grad_action) const {
  TrigAngle t = AngleOf(x[0], x[1]);
  grad_x[0] = -2.0 * t.angle * t.d_cos;
  grad_x[1] = -2.0 * t.angle * t.d_sin;
  grad_x[2] = -0.2 * x[2];
  grad_action[0] = -0.002 * action[0];
}

double PendulumEnv::MechanicalEnergy(double theta, double theta_dot) {
  const double inertia = kMass * kLength * kLength / 3.0;
  return 0.5 * inertia * theta_dot * theta_dot +
         kMass * kGravity * 0.5 * kLength * (1.0 + std::cos(theta));
}

// ------------------------------------------------------------- cartpole --

CartpoleEnv::CartpoleEnv()
    : spec_(MakeSpec("cartpole", 5, kMaxForce, 1, kEpisodeLength, kDt)) {}

EnvState CartpoleEnv::Reset(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const double x = Uniform(rng, -kInitJitter, kInitJitter);
  const double theta = WrapAngle(std::numbers::pi + Uniform(rng, -kInitJitter, kInitJitter));
  const double x_dot = Uniform(rng, -kInitJitter, kInitJitter);
  const double theta_dot = Uniform(rng, -kInitJitter, kInitJitter);
  return EnvState{{x, std::cos(theta), std::sin(theta), x_dot, theta_dot}, 0, false};
}

// Frictionless cart-pole equations of motion with a uniform pole of half
// length l; semi-implicit Euler.
void CartpoleEnv::Integrate(std::span<const double> x, std::span<const double> action,
                            std::span<double> next) const {
  const double total = kCartMass + kPoleMass;
  const double theta = std::atan2(x[2], x[1]);
  const double s = std::sin(theta), c = std::cos(theta);
  const double theta_dot = x[4];
  const double temp = (action[0] + kPoleMass * kHalfLength * theta_dot * theta_dot * s) / total;
  const double theta_acc = (kGravity * s - c * temp) /
                           (kHalfLength * (4.0 / 3.0 - kPoleMass * c * c / total));
  const double x_acc = temp - kPoleMass * kHalfLength * theta_acc * c / total;
  const double new_x_dot = x[3] + kDt * x_acc;
  const double new_theta_dot = theta_dot + kDt * theta_acc;
  const double new_theta = theta + kDt * new_theta_dot;
  next[0] = x[0] + kDt * new_x_dot;
  next[1] = std::cos(new_theta);
  next[2] = std::sin(new_theta);
  next[3] = new_x_dot;
  next[4] = new_theta_dot;
}

double CartpoleEnv::Reward(std::span<const double> x,
                           std::span<const double> action) const {
  const double theta = AngleOf(x[1], x[2]).angle;
  return -(theta * theta + 0.1 * x[0] * x[0] + 0.01 * x[4] * x[4] +
           0.001 * action[0] * action[0]);
}

void CartpoleEnv::RewardGradient(std::span<const double> x,
                                 std::span<const double> action,
                                 std::span<double> grad_x,
                                 std::span<double> grad_action) const {
  TrigAngle t = AngleOf(x[1], x[2]);
  grad_x[0] = -0.2 * x[0];
  grad_x[1] = -2.0 * t.angle * t.d_cos;
  grad_x[2] = -2.0 * t.angle * t.d_sin;
  grad_x[3] = 0.0;
  grad_x[4] = -0.02 * x[4];
  grad_action[0] = -0.002 * action[0];
}

// ----------------------------------------------------------- point mass --

PointMassEnv::PointMassEnv()
    : spec_(MakeSpec("point_mass", 4, 1.0, 2, kEpisodeLength, kDt)) {}

EnvState PointMassEnv::Reset(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const double px = Uniform(rng, -kStartBox, kStartBox);
  const double py = Uniform(rng, -kStartBox, kStartBox);
  return EnvState{{px, py, 0.0, 0.0}, 0, false};
}

void PointMassEnv::Integrate(std::span<const double> x, std::span<const double> action,
                             std::span<double> next) const {
  for (int i = 0; i < 2; ++i) {
    const double v = x[2 + i] + kDt * action[i] / kMass;
    next[i] = x[i] + kDt * v;
    next[2 + i] = v;
  }
}

double PointMassEnv::Reward(std::span<const double> x,
                            std::span<const double> action) const {
  return -(x[0] * x[0] + x[1] * x[1] +
           0.01 * (action[0] * action[0] + action[1] * action[1]));
}

void PointMassEnv::RewardGradient(std::span<const double> x,
                                  std::span<const double> action,
                                  std::span<double> grad_x,
                                  std::span<double> grad_action) const {
  grad_x[0] = -2.0 * x[0];
  grad_x[1] = -2.0 * x[1];
  grad_x[2] = 0.0;
  grad_x[3] = 0.0;
  grad_action[0] = -0.02 * action[0];
  grad_action[1] = -0.02 * action[1];
}

// ------------------------------------------------------------- registry --

std::unique_ptr<Environment> MakeEnvironment(std::string_view name) {
  if (name == "pendulum") return std::make_unique<PendulumEnv>();
  if (name == "cartpole") return std::make_unique<CartpoleEnv>();
  if (name == "point_mass") return std::make_unique<PointMassEnv>();
  throw ConfigError("unknown environment '" + std::string(name) + "'");
}

std::vector<std::string> EnvironmentNames() {
  return {"pendulum", "cartpole", "point_mass"};
}

// --------------------------------------------------------------- oracle --

Prediction OracleDynamics::Predict(std::span<const double> state,
                                   std::span<const double> action) const {
  EnvState next = env_.Step(EnvState{{state.begin(), state.end()}, 0, false}, action);
  return Prediction{std::move(next.x), std::vector<double>(state_dim(), 0.0)};
}

void OracleDynamics::PredictMeanBatch(std::span<const double> states,
                                      std::span<const double> actions,
                                      std::size_t rows,
                                      std::span<double> next) const {
  const std::size_t ds = state_dim(), da = action_dim();
  std::vector<double> a(da);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(actions.data() + r * da, da, a.data());
    env_.ClipAction(a);
    env_.Integrate(states.subspan(r * ds, ds), a, next.subspan(r * ds, ds));
  }
}

}  // namespace ebplan
