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
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ebplan/dynamics.h"
#include "ebplan/envs.h"
#include "ebplan/errors.h"
#include "test_util.h"

namespace ebplan {
namespace {

using ::ebplan::testing::CentralDifference;
using ::ebplan::testing::Flatten;
using ::ebplan::testing::MaxRelativeError;
using ::ebplan::testing::RandomVector;
using ::ebplan::testing::Unflatten;

NetworkParams ZeroNet(std::size_t in, std::size_t ds) {
  return NetworkParams{{Layer{Tensor(8, in), Tensor::Vector(std::vector<double>(8, 0.0)),
                              Activation::kSoftplus},
                        Layer{Tensor(2 * ds, 8),
                              Tensor::Vector(std::vector<double>(2 * ds, 0.0)),
                              Activation::kIdentity}}};
}

// 1-D s' = 0.9 s + 0.1 a, s and a uniform in [-1, 1].
TransitionBatch LinearSystem(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TransitionBatch b{Tensor(n, 1), Tensor(n, 1), Tensor(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    b.states[i] = u(rng);
    b.actions[i] = u(rng);
    b.next_states[i] = 0.9 * b.states[i] + 0.1 * b.actions[i];
  }
  return b;
}

DynamicsTrainConfig SmallConfig(int epochs) {
  DynamicsTrainConfig c;
  c.hidden_sizes = {32, 32};
  c.epochs = epochs;
  c.batch_size = 32;
  c.learning_rate = 3e-3;
  c.seed = 1;
  return c;
}

const TrainedDynamics& LinearModel() {
  static const TrainedDynamics t = TrainDynamics(LinearSystem(2000, 3), SmallConfig(60));
  return t;
}

TransitionBatch PendulumRandomData(int episodes) {
  PendulumEnv env;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const std::size_t n = static_cast<std::size_t>(episodes) * 200;
  TransitionBatch b{Tensor(n, 3), Tensor(n, 1), Tensor(n, 3)};
  std::size_t row = 0;
  for (int e = 0; e < episodes; ++e) {
    EnvState s = env.Reset(100 + e);
    for (int t = 0; t < 200; ++t, ++row) {
      std::vector<double> a = {u(rng)};
      EnvState next = env.Step(s, a);
      std::copy(s.x.begin(), s.x.end(), b.states.row(row).begin());
      b.actions(row, 0) = a[0];
      std::copy(next.x.begin(), next.x.end(), b.next_states.row(row).begin());
      s = next;
    }
  }
  return b;
}

// -------------------------------------------------------------- predict --

TEST(PredictTest, ZeroNetworkPredictsMeanDelta) {
  Normalizer out{{0.25, -1.5}, {2.0, 3.0}, false};
  DynamicsModel m(ZeroNet(3, 2), Normalizer::Identity(3), out);
  Prediction p = m.Predict(std::vector<double>{1.0, 2.0}, std::vector<double>{0.5});
  EXPECT_EQ(p.mean, (std::vector<double>{1.25, 0.5}));
}

TEST(PredictTest, LogVarianceClampSaturates) {
  NetworkParams high = ZeroNet(2, 1);
  high.layers[1].bias[1] = 1e3;
  DynamicsModel m(high, Normalizer::Identity(2), Normalizer::Identity(1));
  EXPECT_EQ(m.Predict(std::vector<double>{0.0}, std::vector<double>{0.0}).variance[0],
            std::exp(4.0));
  NetworkParams low = ZeroNet(2, 1);
  low.layers[1].bias[1] = -1e3;
  DynamicsModel n(low, Normalizer::Identity(2), Normalizer::Identity(1));
  EXPECT_EQ(n.Predict(std::vector<double>{0.0}, std::vector<double>{0.0}).variance[0],
            std::exp(-10.0));
}

TEST(PredictTest, VarianceStaysInsideBoundsForWildNetworks) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkParams p = InitNetwork(std::vector<std::size_t>{3, 16, 4}, Activation::kSoftplus, rng);
    for (Layer& l : p.layers) {
      for (double& w : l.weight.data()) w *= 200.0;
    }
    DynamicsModel m(p, Normalizer::Identity(3), Normalizer::Identity(2));
    for (int k = 0; k < 20; ++k) {
      Prediction pr = m.Predict(RandomVector(2, rng, 3.0), RandomVector(1, rng, 3.0));
      for (double v : pr.variance) {
        EXPECT_GE(v, std::exp(-10.0));
        EXPECT_LE(v, std::exp(4.0));
      }
    }
  }
}

TEST(PredictTest, DeterministicAndBatchConsistent) {
  const DynamicsModel& m = LinearModel().model;
  std::vector<double> s = {0.1, -0.4, 0.7}, a = {0.3, 0.2, -0.9}, next(3);
  m.PredictMeanBatch(s, a, 3, next);
  for (int i = 0; i < 3; ++i) {
    Prediction p1 = m.Predict(std::vector<double>{s[i]}, std::vector<double>{a[i]});
    Prediction p2 = m.Predict(std::vector<double>{s[i]}, std::vector<double>{a[i]});
    EXPECT_EQ(p1.mean, p2.mean);
    EXPECT_EQ(p1.mean[0], next[i]);
  }
}

TEST(PredictTest, DeltaIgnoresStateTranslationWhenNetworkIgnoresState) {
  // Network reads only the action column, so the delta must not change when
  // the state is moved arbitrarily far.
  std::mt19937_64 rng(3);
  NetworkParams p = InitNetwork(std::vector<std::size_t>{3, 8, 4}, Activation::kSoftplus, rng);
  for (std::size_t r = 0; r < 8; ++r) {
    p.layers[0].weight(r, 0) = 0.0;
    p.layers[0].weight(r, 1) = 0.0;
  }
  Normalizer in{{5.0, -2.0, 0.1}, {2.0, 0.5, 0.7}, false};
  Normalizer out{{0.3, 0.1}, {1.5, 0.2}, false};
  DynamicsModel m(p, in, out);
  std::vector<double> a = {0.4};
  Prediction base = m.Predict(std::vector<double>{0.0, 0.0}, a);
  for (double shift : {1.0, -37.5, 1e6}) {
    Prediction moved = m.Predict(std::vector<double>{shift, shift}, a);
    // Only the final s + delta addition rounds.
    const double ulp = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(shift);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(moved.mean[j] - shift, base.mean[j], ulp);
  }
}

TEST(PredictTest, InputChecks) {
  const DynamicsModel& m = LinearModel().model;
  EXPECT_THROW(m.Predict(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0}), ShapeError);
  EXPECT_THROW(m.Predict(std::vector<double>{NAN}, std::vector<double>{0.0}), NumericError);
  EXPECT_THROW(DynamicsModel(ZeroNet(2, 2), Normalizer::Identity(2), Normalizer::Identity(2)),
               ShapeError);
}

TEST(PredictTest, MeanJacobianProductMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  NetworkParams p = InitNetwork(std::vector<std::size_t>{5, 16, 16, 6}, Activation::kSoftplus, rng);
  Normalizer in{{0.1, 0.2, -0.3, 0.0, 1.0}, {1.5, 0.5, 2.0, 1.0, 0.7}, false};
  Normalizer out{{0.0, 0.1, -0.1}, {0.3, 0.8, 1.2}, false};
  DynamicsModel m(p, in, out);
  std::vector<double> s = RandomVector(3, rng), a = RandomVector(2, rng), c = RandomVector(3, rng);
  std::vector<double> gs(3), ga(2);
  m.MeanVectorJacobianProduct(s, a, 1, c, gs, ga);
  auto f = [&](const std::vector<double>& x, const std::vector<double>& u) {
    std::vector<double> next(3);
    m.PredictMeanBatch(x, u, 1, next);
    return c[0] * next[0] + c[1] * next[1] + c[2] * next[2];
  };
  EXPECT_LE(MaxRelativeError(gs, CentralDifference([&](auto& x) { return f(x, a); }, s, 1e-5)),
            1e-6);
  EXPECT_LE(MaxRelativeError(ga, CentralDifference([&](auto& u) { return f(s, u); }, a, 1e-5)),
            1e-6);
}

// ------------------------------------------------------------------ NLL --

TEST(NllTest, PerfectMeanUnitVarianceIsHalfLogTwoPi) {
  // Wide bounds make the soft clamp exact at a raw log-variance of 0.
  DynamicsModel m(ZeroNet(2, 1), Normalizer::Identity(2), Normalizer::Identity(1),
                  {-50.0, 50.0});
  TransitionBatch b{Tensor::Matrix(2, 1, {1.0, -3.0}), Tensor::Matrix(2, 1, {0.5, 2.0}),
                    Tensor::Matrix(2, 1, {1.0, -3.0})};
  EXPECT_DOUBLE_EQ(NllLoss(m, b), 0.5 * std::log(2.0 * std::numbers::pi));
}

TEST(NllTest, DoublingTheErrorAddsHalfTheSquareDifference) {
  DynamicsModel m(ZeroNet(2, 1), Normalizer::Identity(2), Normalizer::Identity(1),
                  {-50.0, 50.0});
  auto batch = [](double delta) {
    return TransitionBatch{Tensor::Matrix(1, 1, {0.0}), Tensor::Matrix(1, 1, {0.0}),
                           Tensor::Matrix(1, 1, {delta})};
  };
  const double old_err = 0.7, new_err = 1.4;
  EXPECT_NEAR(NllLoss(m, batch(new_err)) - NllLoss(m, batch(old_err)),
              (new_err * new_err - old_err * old_err) / 2.0, 1e-14);
}

TEST(NllTest, ParameterGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  NetworkParams p = InitNetwork(std::vector<std::size_t>{3, 6, 6, 4}, Activation::kSoftplus, rng);
  Tensor in({7, 3}, RandomVector(21, rng));
  Tensor target({7, 2}, RandomVector(14, rng));
  LogVarianceBounds bounds{-3.0, 2.0};
  ad::Tape tape;
  TapedNetwork net = LoadOnTape(tape, p);
  NetworkParams g = ParamGradients(TapedNllLoss(net, tape, in, target, bounds), net, p);
  auto loss = [&](const std::vector<double>& flat) {
    ad::Tape t;
    return TapedNllLoss(LoadOnTape(t, Unflatten(p, flat)), t, in, target, bounds).value()[0];
  };
  EXPECT_LE(MaxRelativeError(Flatten(g), CentralDifference(loss, Flatten(p), 1e-6)), 1e-4);
}

TEST(NllTest, EmptyBatchIsContractError) {
  DynamicsModel m(ZeroNet(2, 1), Normalizer::Identity(2), Normalizer::Identity(1));
  EXPECT_THROW(NllLoss(m, TransitionBatch{}), ContractError);
}

// ------------------------------------------------------------- training --

TEST(TrainDynamicsTest, LinearSystemOneStepError) {
  const TrainedDynamics& t = LinearModel();
  TransitionBatch held = LinearSystem(200, 99);
  double worst = 0.0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    double pred = t.model.Predict(held.states.row(i), held.actions.row(i)).mean[0];
    worst = std::max(worst, std::abs(pred - held.next_states[i]));
  }
  EXPECT_LE(worst, 1e-2);
  EXPECT_LT(t.report.train_nll.back(), t.report.train_nll.front());
}

TEST(TrainDynamicsTest, LinearSystemRolloutFollowsClosedForm) {
  const DynamicsModel& m = LinearModel().model;
  Tensor actions(10, 1);
  for (std::size_t t = 0; t < 10; ++t) actions[t] = std::sin(0.7 * t);
  const double s0 = 0.8;
  Tensor states = Rollout(m, std::vector<double>{s0}, actions);
  double s = s0;
  for (std::size_t t = 0; t < 10; ++t) {
    s = 0.9 * s + 0.1 * actions[t];
    EXPECT_NEAR(states[t], s, 0.05);
  }
}

TEST(TrainDynamicsTest, IdentitySystemRolloutBarelyDrifts) {
  TransitionBatch b = LinearSystem(1000, 8);
  b.next_states = b.states;
  DynamicsTrainConfig c = SmallConfig(40);
  c.learning_rate = 1e-3;
  TrainedDynamics t = TrainDynamics(b, c);
  EXPECT_TRUE(t.report.degenerate_input);  // every delta is exactly zero
  const std::size_t h = 20;
  Tensor actions(h + 1, 1, 0.5);
  Tensor states = Rollout(t.model, std::vector<double>{0.3}, actions);
  for (std::size_t i = 0; i <= h; ++i) EXPECT_NEAR(states[i], 0.3, 1e-2 * h);
}

TEST(TrainDynamicsTest, PendulumHoldoutErrorDropsFivefold) {
  DynamicsTrainConfig c = SmallConfig(40);
  c.hidden_sizes = {64, 64};
  TrainedDynamics t = TrainDynamics(PendulumRandomData(5), c);
  EXPECT_LE(t.report.holdout_rmse * 5.0, t.report.initial_holdout_rmse);
}

TEST(TrainDynamicsTest, RepeatedTransitionWarnsAndCompletes) {
  TransitionBatch b{Tensor(5, 2, 1.0), Tensor(5, 1, 0.5), Tensor(5, 2, 1.5)};
  TrainedDynamics t = TrainDynamics(b, SmallConfig(2));
  EXPECT_TRUE(t.report.degenerate_input);
  EXPECT_EQ(t.report.train_nll.size(), 2u);
}

TEST(TrainDynamicsTest, ReproducibleGivenSeed) {
  TransitionBatch b = LinearSystem(300, 4);
  TrainedDynamics x = TrainDynamics(b, SmallConfig(3));
  TrainedDynamics y = TrainDynamics(b, SmallConfig(3));
  EXPECT_EQ(x.model, y.model);
  EXPECT_EQ(x.report.holdout_nll, y.report.holdout_nll);
}

TEST(TrainDynamicsTest, TooFewTransitions) {
  EXPECT_THROW(TrainDynamics(LinearSystem(1, 0), SmallConfig(1)), ContractError);
}

// -------------------------------------------------------------- rollout --

class NanAfter final : public Predictor {
 public:
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  Prediction Predict(std::span<const double>, std::span<const double>) const override {
    return {};
  }
  void PredictMeanBatch(std::span<const double> s, std::span<const double>, std::size_t,
                        std::span<double> next) const override {
    next[0] = s[0] >= 2.0 ? NAN : s[0] + 1.0;
  }
};

TEST(RolloutTest, NonFiniteStateReportsStep) {
  try {
    Rollout(NanAfter(), std::vector<double>{0.0}, Tensor(5, 1));
    FAIL() << "expected RolloutError";
  } catch (const RolloutError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(RolloutTest, ShapeChecks) {
  EXPECT_THROW(Rollout(NanAfter(), std::vector<double>{0.0, 1.0}, Tensor(2, 1)), ShapeError);
  EXPECT_THROW(Rollout(NanAfter(), std::vector<double>{0.0}, Tensor(2, 2)), ShapeError);
}

}  // namespace
}  // namespace ebplan
