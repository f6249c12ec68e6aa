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

#ifndef EBPLAN_ENVS_H_
#define EBPLAN_ENVS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ebplan/predictor.h"

namespace ebplan {

struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  int episode_length = 1;
  double dt = 0.0;

  // Throws ConfigError unless bounds are finite with low < high and
  // episode_length >= 1.
  void Validate() const;
};

struct EnvState {
  std::vector<double> x;  // observation vector, e.g. [cos th, sin th, th_dot]
  int step = 0;
  bool action_clipped = false;  // the action that produced this state

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

// An analytic control task. Every method is pure, so one instance can serve
// any number of concurrent rollouts.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;

  // Draw from the documented initial distribution.
  virtual EnvState Reset(std::uint64_t seed) const = 0;

  // Clip the action to the bounds, integrate one step. Throws NumericError on
  // a non-finite action.
  EnvState Step(const EnvState& state, std::span<const double> action) const;

  // One integration step for an action already inside the bounds, unchecked.
  virtual void Integrate(std::span<const double> x, std::span<const double> action,
                         std::span<double> next) const = 0;

  // r(s, a). The planner evaluates exactly this function on imagined states.
  virtual double Reward(std::span<const double> x,
                        std::span<const double> action) const = 0;

  // Partial derivatives of Reward, for gradient-based planning.
  virtual void RewardGradient(std::span<const double> x,
                              std::span<const double> action,
                              std::span<double> grad_x,
                              std::span<double> grad_action) const = 0;

  // Clamp in place; true if any component moved.
  bool ClipAction(std::span<double> action) const;
};

// Swing a torque-limited pendulum upright. Observation [cos th, sin th,
// th_dot] with th = 0 upright, action torque in [-2, 2].
class PendulumEnv final : public Environment {
 public:
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kDamping = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kDt = 0.05;
  static constexpr int kEpisodeLength = 200;
  static constexpr double kInitJitter = 0.1;

  PendulumEnv();
  const EnvSpec& spec() const override { return spec_; }
  EnvState Reset(std::uint64_t seed) const override;
  void Integrate(std::span<const double> x, std::span<const double> action,
                 std::span<double> next) const override;
  double Reward(std::span<const double> x,
                std::span<const double> action) const override;
  void RewardGradient(std::span<const double> x, std::span<const double> action,
                      std::span<double> grad_x,
                      std::span<double> grad_action) const override;

  // Kinetic plus potential energy of the rod (zero hanging at rest).
  static double MechanicalEnergy(double theta, double theta_dot);

 private:
  EnvSpec spec_;
};

// Cart-pole swing-up. Observation [x, cos th, sin th, x_dot, th_dot] with
// th = 0 upright, action force in [-10, 10].
class CartpoleEnv final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kMaxForce = 10.0;
  static constexpr double kDt = 0.05;
  static constexpr int kEpisodeLength = 200;
  static constexpr double kInitJitter = 0.05;

  CartpoleEnv();
  const EnvSpec& spec() const override { return spec_; }
  EnvState Reset(std::uint64_t seed) const override;
  void Integrate(std::span<const double> x, std::span<const double> action,
                 std::span<double> next) const override;
  double Reward(std::span<const double> x,
                std::span<const double> action) const override;
  void RewardGradient(std::span<const double> x, std::span<const double> action,
                      std::span<double> grad_x,
                      std::span<double> grad_action) const override;

 private:
  EnvSpec spec_;
};

// Drive a unit point mass in the plane to the origin. State [px, py, vx, vy],
// action force in [-1, 1]^2.
class PointMassEnv final : public Environment {
 public:
  static constexpr double kMass = 1.0;
  static constexpr double kDt = 0.1;
  static constexpr int kEpisodeLength = 100;
  static constexpr double kStartBox = 2.0;

  PointMassEnv();
  const EnvSpec& spec() const override { return spec_; }
  EnvState Reset(std::uint64_t seed) const override;
  void Integrate(std::span<const double> x, std::span<const double> action,
                 std::span<double> next) const override;
  double Reward(std::span<const double> x,
                std::span<const double> action) const override;
  void RewardGradient(std::span<const double> x, std::span<const double> action,
                      std::span<double> grad_x,
                      std::span<double> grad_action) const override;

 private:
  EnvSpec spec_;
};

// "pendulum", "cartpole" or "point_mass"; ConfigError otherwise.
std::unique_ptr<Environment> MakeEnvironment(std::string_view name);
std::vector<std::string> EnvironmentNames();

// Angle wrapped to (-pi, pi].
double WrapAngle(double angle);

// The exact environment step as a Predictor with zero variance.
class OracleDynamics final : public Predictor {
 public:
  explicit OracleDynamics(const Environment& env) : env_(env) {}

  std::size_t state_dim() const override { return env_.spec().state_dim; }
  std::size_t action_dim() const override { return env_.spec().action_dim; }
  Prediction Predict(std::span<const double> state,
                     std::span<const double> action) const override;
  void PredictMeanBatch(std::span<const double> states,
                        std::span<const double> actions, std::size_t rows,
                        std::span<double> next) const override;

 private:
  const Environment& env_;
};

}  // namespace ebplan

#endif  // EBPLAN_ENVS_H_
