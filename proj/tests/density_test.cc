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

#include "ebplan/density.h"
#include "ebplan/errors.h"
#include "test_util.h"

namespace ebplan {
namespace {

using ::ebplan::testing::CentralDifference;
using ::ebplan::testing::MaxRelativeError;
using ::ebplan::testing::RandomVector;

const GaussianMixture1D kTwoModes{{0.5, 0.5}, {-2.0, 2.0}, {0.5, 0.5}};

NetworkParams ConstantNet(std::size_t in, double bias) {
  return NetworkParams{{Layer{Tensor(4, in), Tensor::Vector({0, 0, 0, 0}),
                              Activation::kSoftplus},
                        Layer{Tensor(1, 4), Tensor::Vector({bias}),
                              Activation::kIdentity}}};
}

NetworkParams LinearNet(std::vector<double> w, double bias) {
  std::size_t n = w.size();
  return NetworkParams{{Layer{Tensor({1, n}, std::move(w)), Tensor::Vector({bias}),
                              Activation::kIdentity}}};
}

NetworkParams IdentityDenoiser(std::size_t d) {
  Tensor w(d, d);
  for (std::size_t i = 0; i < d; ++i) w(i, i) = 1.0;
  return NetworkParams{{Layer{w, Tensor::Vector(std::vector<double>(d, 0.0)),
                              Activation::kIdentity}}};
}

NetworkParams ZeroDenoiser(std::size_t d) {
  return NetworkParams{{Layer{Tensor(d, d), Tensor::Vector(std::vector<double>(d, 0.0)),
                              Activation::kIdentity}}};
}

Tensor Column(const std::vector<double>& v) { return Tensor({v.size(), 1}, v); }

Tensor StandardNormal2D(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Tensor({n, 2}, RandomVector(2 * n, rng));
}

// Corrupted-mixture density and its derivative by trapezoid quadrature of the
// convolution integral; independent of the closed form in GmmOracle.
GmmOracleValue QuadratureOracle(const GaussianMixture1D& mix, double sigma,
                                double y) {
  auto normal = [](double x, double m, double s) {
    return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) /
           (s * std::sqrt(2.0 * std::numbers::pi));
  };
  const double lo = -15.0, hi = 15.0;
  const int n = 60000;
  const double h = (hi - lo) / n;
  double p = 0.0, dp = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i;
    double px = 0.0;
    for (std::size_t k = 0; k < mix.weights.size(); ++k) {
      px += mix.weights[k] * normal(x, mix.means[k], mix.stddevs[k]);
    }
    const double kernel = normal(y, x, sigma);
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    p += w * px * kernel;
    dp += w * px * kernel * (-(y - x) / (sigma * sigma));
  }
  p *= h;
  dp *= h;
  return GmmOracleValue{-std::log(p), dp / p};
}

struct GmmFit {
  std::vector<double> grid;
  double lo, hi;
};

GmmFit GmmGrid(double sigma) {
  GmmFit f;
  f.lo = GmmQuantile(kTwoModes, sigma, 0.005);
  f.hi = GmmQuantile(kTwoModes, sigma, 0.995);
  for (int i = 0; i <= 200; ++i) f.grid.push_back(f.lo + (f.hi - f.lo) * i / 200.0);
  return f;
}

// Samples are mirrored so the training set is exactly symmetric; the learned
// score between the modes is otherwise dominated by sampling imbalance.
Tensor Mirrored(const Tensor& x) {
  std::vector<double> v(x.data().begin(), x.data().end());
  for (double s : x.data()) v.push_back(-s);
  return Tensor({2 * x.rows(), x.cols()}, std::move(v));
}

DensityTrainConfig GmmConfig(double learning_rate) {
  DensityTrainConfig c;
  c.noise = {0.5, 3};
  c.epochs = 200;
  c.batch_size = 64;
  c.learning_rate = learning_rate;
  c.hidden_sizes = {64, 64};
  c.normalize = false;
  return c;
}

Tensor GmmSamples() {
  std::mt19937_64 rng(11);
  return Mirrored(Column(kTwoModes.Sample(2000, rng)));
}

const TrainedEnergy& GmmDeen() {
  static const TrainedEnergy trained = TrainDeen(GmmSamples(), GmmConfig(1e-3));
  return trained;
}

const TrainedDenoiser& GmmDae() {
  static const TrainedDenoiser trained = TrainDae(GmmSamples(), GmmConfig(3e-3));
  return trained;
}

// The exact answer is linear, so small networks keep estimator variance low;
// the DAE score divides the residual by sigma^2 and needs the smaller one.
DensityTrainConfig GaussianConfig(std::size_t width, int epochs) {
  DensityTrainConfig c;
  c.noise = {0.5, 5};
  c.epochs = epochs;
  c.batch_size = 128;
  c.learning_rate = 3e-4;
  c.hidden_sizes = {width, width};
  return c;
}

const TrainedEnergy& GaussianDeen() {
  static const TrainedEnergy trained =
      TrainDeen(Mirrored(StandardNormal2D(4000, 21)), GaussianConfig(32, 60));
  return trained;
}

const TrainedDenoiser& GaussianDae() {
  static const TrainedDenoiser trained =
      TrainDae(Mirrored(StandardNormal2D(4000, 21)), GaussianConfig(16, 100));
  return trained;
}

// Points on a polar grid inside radius 2.
std::vector<std::vector<double>> DiskPoints() {
  std::vector<std::vector<double>> pts;
  for (double r : {0.0, 0.5, 1.0, 1.5, 2.0}) {
    for (int k = 0; k < 12; ++k) {
      double a = 2.0 * std::numbers::pi * k / 12.0;
      pts.push_back({r * std::cos(a), r * std::sin(a)});
      if (r == 0.0) break;
    }
  }
  return pts;
}

// -------------------------------------------------------------- corrupt --

TEST(CorruptTest, ZeroNoiseIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor x({3, 2}, RandomVector(6, rng));
  EXPECT_EQ(Corrupt(x, {0.0, 9}), x);
}

TEST(CorruptTest, NoiseMomentsMatch) {
  const std::size_t n = 100000;
  const double sigma = 0.7;
  Tensor x(n, 2, 3.0);
  Tensor y = Corrupt(x, {sigma, 4});
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y(i, j) - x(i, j);
    mean /= n;
    for (std::size_t i = 0; i < n; ++i) {
      double d = y(i, j) - x(i, j) - mean;
      var += d * d;
    }
    var /= n;
    EXPECT_LE(std::abs(mean), 4.0 * sigma / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(var, sigma * sigma, 0.05 * sigma * sigma);
  }
}

TEST(CorruptTest, NegativeSigmaRejected) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(Corrupt(Tensor(1, 1), -1.0, rng), ConfigError);
}

// ------------------------------------------------------------ DEEN loss --

TEST(DeenLossTest, ZeroGradientNetworkGivesMeanSquaredDistance) {
  Tensor x = Tensor::Matrix(2, 2, {1, 2, 3, 4});
  Tensor y = Tensor::Matrix(2, 2, {0, 2, 5, 5});
  // ((1)^2 + 0 + (-2)^2 + (-1)^2) / 2 = 3
  EXPECT_DOUBLE_EQ(DeenLoss(ConstantNet(2, 1.5), x, y, 0.3), 3.0);
}

TEST(DeenLossTest, IdenticalPairWithZeroGradientIsZero) {
  Tensor x = Tensor::Matrix(1, 2, {0.4, -1});
  EXPECT_EQ(DeenLoss(ConstantNet(2, 0.0), x, x, 0.3), 0.0);
}

TEST(DeenLossTest, LinearEnergyClosedForm) {
  const double sigma = 0.5;
  std::vector<double> w = {2.0, -1.0};
  Tensor x = Tensor::Matrix(1, 2, {1.0, 0.5});
  Tensor y = Tensor::Matrix(1, 2, {0.2, 1.0});
  double r0 = 1.0 - 0.2 + sigma * sigma * 2.0;
  double r1 = 0.5 - 1.0 + sigma * sigma * -1.0;
  EXPECT_NEAR(DeenLoss(LinearNet(w, 0.0), x, y, sigma), r0 * r0 + r1 * r1, 1e-15);
}

TEST(DeenLossTest, TapedMatchesDirect) {
  std::mt19937_64 rng(2);
  NetworkParams p = InitNetwork(std::vector<std::size_t>{3, 8, 1},
                                Activation::kSoftplus, rng);
  Tensor x({5, 3}, RandomVector(15, rng));
  Tensor y = Corrupt(x, 0.4, rng);
  ad::Tape tape;
  TapedNetwork net = LoadOnTape(tape, p);
  EXPECT_NEAR(TapedDeenLoss(net, tape, x, y, 0.4).value()[0],
              DeenLoss(p, x, y, 0.4), 1e-13);
}

TEST(DeenLossTest, VanishesAsSigmaShrinksOnCleanBatch) {
  std::mt19937_64 rng(8);
  NetworkParams p = InitNetwork(std::vector<std::size_t>{2, 8, 1},
                                Activation::kSoftplus, rng);
  Tensor x({4, 2}, RandomVector(8, rng));
  double previous = DeenLoss(p, x, x, 1.0);
  for (double sigma : {1e-1, 1e-2, 1e-3}) {
    double loss = DeenLoss(p, x, x, sigma);
    EXPECT_LT(loss, previous);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-10);
}

TEST(DeenLossTest, EmptyBatchIsContractError) {
  EXPECT_THROW(DeenLoss(ConstantNet(2, 0.0), Tensor(), Tensor(), 0.1),
               ContractError);
}

// ------------------------------------------------------------- DAE loss --

TEST(DaeLossTest, IdentityNetworkOnCleanBatch) {
  Tensor x = Tensor::Matrix(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(DaeLoss(IdentityDenoiser(2), x, x), 0.0);
}

TEST(DaeLossTest, ZeroNetworkHandComputation) {
  EXPECT_EQ(DaeLoss(ZeroDenoiser(1), Tensor::Matrix(1, 1, {1}),
                    Tensor::Matrix(1, 1, {3})),
            1.0);
}

TEST(DaeLossTest, EmptyBatchIsContractError) {
  EXPECT_THROW(DaeLoss(ZeroDenoiser(1), Tensor(), Tensor()), ContractError);
}

// ------------------------------------------------------- energy / score --

TEST(EnergyModelTest, ConstantNetworkEnergyIsBias) {
  EnergyModel m(ConstantNet(3, -0.75), Normalizer::Identity(3), 0.1);
  for (std::vector<double> v : {std::vector<double>{0, 0, 0}, {5, -1, 2}}) {
    EXPECT_EQ(m.Energy(v), -0.75);
    for (double s : m.Score(v)) EXPECT_EQ(s, 0.0);
  }
}

TEST(EnergyModelTest, BiasOffsetShiftsEnergyAndKeepsScore) {
  const EnergyModel& trained = GaussianDeen().model;
  NetworkParams shifted = trained.params();
  const double c = 3.25;
  shifted.layers.back().bias[0] += c;
  EnergyModel m(shifted, trained.normalizer(), trained.sigma());
  for (const auto& v : DiskPoints()) {
    EXPECT_NEAR(m.Energy(v) - trained.Energy(v), c, 1e-12);
    EXPECT_EQ(m.Score(v), trained.Score(v));
  }
}

TEST(EnergyModelTest, ScoreMatchesFiniteDifferenceOfEnergy) {
  const EnergyModel& m = GaussianDeen().model;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> v = RandomVector(2, rng, 1.5);
    std::vector<double> fd = CentralDifference(
        [&](const std::vector<double>& x) { return -m.Energy(x); }, v, 1e-5);
    EXPECT_LE(MaxRelativeError(m.Score(v), fd), 1e-6);
  }
}

TEST(EnergyModelTest, RejectsBadInput) {
  EnergyModel m(ConstantNet(2, 0.0), Normalizer::Identity(2), 0.1);
  EXPECT_THROW(m.Energy(std::vector<double>{1.0}), ShapeError);
  EXPECT_THROW(m.Energy(std::vector<double>{1.0, NAN}), NumericError);
  EXPECT_THROW(EnergyModel(LinearNet({1, 1}, 0), Normalizer::Identity(3), 0.1),
               ShapeError);
}

// ----------------------------------------------------------- DEEN train --

TEST(TrainDeenTest, GmmScoreMatchesAnalyticCorruptedMixture) {
  const EnergyModel& m = GmmDeen().model;
  GmmFit fit = GmmGrid(0.5);
  double se = 0.0;
  for (double y : fit.grid) {
    double d = m.Score(std::vector<double>{y})[0] - GmmOracle(kTwoModes, 0.5, y).score;
    se += d * d;
  }
  EXPECT_LE(std::sqrt(se / fit.grid.size()), 0.5);
}

TEST(TrainDeenTest, GmmEnergyDifferenceMatchesAnalytic) {
  const EnergyModel& m = GmmDeen().model;
  double learned = m.Energy(std::vector<double>{0.0}) - m.Energy(std::vector<double>{2.0});
  double exact = GmmOracle(kTwoModes, 0.5, 0.0).neg_log_density -
                 GmmOracle(kTwoModes, 0.5, 2.0).neg_log_density;
  EXPECT_NEAR(learned, exact, 0.3);
}

TEST(TrainDeenTest, SymmetricMixtureScoreVanishesAtCenter) {
  EXPECT_LE(std::abs(GmmDeen().model.Score(std::vector<double>{0.0})[0]), 0.1);
}

TEST(TrainDeenTest, ValidationLossDecreases) {
  const TrainingReport& r = GmmDeen().report;
  ASSERT_EQ(r.validation_loss.size(), 200u);
  EXPECT_LT(r.validation_loss.back(), r.validation_loss.front());
}

TEST(TrainDeenTest, ConstantDataSetsWarningAndCompletes) {
  DensityTrainConfig c;
  c.epochs = 2;
  c.hidden_sizes = {8};
  TrainedEnergy t = TrainDeen(Tensor(10, 3, 1.25), c);
  EXPECT_TRUE(t.report.degenerate_input);
  EXPECT_TRUE(std::isfinite(t.model.Energy(std::vector<double>{1.25, 1.25, 1.25})));
}

TEST(TrainDeenTest, StandardNormalScoreIsShrunkLinear) {
  const EnergyModel& m = GaussianDeen().model;
  const double shrink = 1.0 / (1.0 + 0.25);
  double se = 0.0;
  int count = 0;
  for (const auto& v : DiskPoints()) {
    std::vector<double> s = m.Score(v);
    for (int j = 0; j < 2; ++j) {
      double d = s[j] + shrink * v[j];
      se += d * d;
      ++count;
    }
  }
  EXPECT_LE(std::sqrt(se / count), 0.1);
}

TEST(TrainDeenTest, StandardNormalScoreIsAntisymmetric) {
  const EnergyModel& m = GaussianDeen().model;
  for (const auto& v : DiskPoints()) {
    std::vector<double> s = m.Score(v);
    std::vector<double> t = m.Score(std::vector<double>{-v[0], -v[1]});
    EXPECT_LE(std::abs(s[0] + t[0]), 0.1);
    EXPECT_LE(std::abs(s[1] + t[1]), 0.1);
  }
}

TEST(TrainDeenTest, DeterministicGivenSeed) {
  DensityTrainConfig c;
  c.epochs = 3;
  c.hidden_sizes = {8, 8};
  Tensor data = StandardNormal2D(100, 4);
  TrainedEnergy a = TrainDeen(data, c);
  TrainedEnergy b = TrainDeen(data, c);
  EXPECT_EQ(a.model.params(), b.model.params());
  EXPECT_EQ(a.report.train_loss, b.report.train_loss);
}

TEST(TrainDeenTest, RejectsTooFewVectorsAndZeroSigma) {
  DensityTrainConfig c;
  EXPECT_THROW(TrainDeen(Tensor(1, 2), c), ContractError);
  c.noise.sigma = 0.0;
  EXPECT_THROW(TrainDeen(Tensor(4, 2), c), ConfigError);
}

// ------------------------------------------------------------ DAE train --

TEST(TrainDaeTest, StandardNormalDenoiserIsShrinkage) {
  const DenoiserModel& m = GaussianDae().model;
  const double shrink = 1.0 / (1.0 + 0.25);
  // Compare in normalized coordinates, where the closed form holds.
  const Normalizer& n = m.normalizer();
  for (const auto& v : DiskPoints()) {
    std::vector<double> raw(2), z(2), gz(2);
    n.Denormalize(v, raw);
    std::vector<double> out = m.Denoise(raw);
    n.Normalize(out, gz);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(gz[j], shrink * v[j], 0.05);
  }
}

TEST(TrainDaeTest, GmmScoreMatchesAnalyticCorruptedMixture) {
  const DenoiserModel& m = GmmDae().model;
  GmmFit fit = GmmGrid(0.5);
  double se = 0.0;
  for (double y : fit.grid) {
    double d = m.Score(std::vector<double>{y})[0] - GmmOracle(kTwoModes, 0.5, y).score;
    se += d * d;
  }
  EXPECT_LE(std::sqrt(se / fit.grid.size()), 0.5);
}

TEST(TrainDaeTest, StandardNormalScoreIsShrunkLinear) {
  const DenoiserModel& m = GaussianDae().model;
  const double shrink = 1.0 / (1.0 + 0.25);
  double se = 0.0;
  int count = 0;
  for (const auto& v : DiskPoints()) {
    std::vector<double> s = m.Score(v);
    for (int j = 0; j < 2; ++j) {
      double d = s[j] + shrink * v[j];
      se += d * d;
      ++count;
    }
  }
  EXPECT_LE(std::sqrt(se / count), 0.1);
}

TEST(TrainDaeTest, ConstantDataSetsWarningAndCompletes) {
  DensityTrainConfig c;
  c.epochs = 2;
  c.hidden_sizes = {8};
  TrainedDenoiser t = TrainDae(Tensor(10, 2, -4.0), c);
  EXPECT_TRUE(t.report.degenerate_input);
}

// ---------------------------------------------------------- DAE penalty --

TEST(DaePenaltyTest, IdentityDenoiserIsZero) {
  DenoiserModel m(IdentityDenoiser(3), Normalizer::Identity(3), 0.1);
  EXPECT_EQ(m.Penalty(std::vector<double>{1, -2, 7}), 0.0);
}

TEST(DaePenaltyTest, ZeroDenoiserHandComputation) {
  Normalizer n{{1.0}, {0.5}, false};
  DenoiserModel m(ZeroDenoiser(1), n, 0.1);
  // raw 2 normalizes to (2 - 1) / 0.5 = 2, so ||0 - 2||^2 = 4
  EXPECT_EQ(m.Penalty(std::vector<double>{2.0}), 4.0);
}

TEST(DaePenaltyTest, GrowsAlongARayForTrainedGaussianDenoiser) {
  const DenoiserModel& m = GaussianDae().model;
  double previous = -1.0;
  for (double r : {0.0, 1.0, 2.0, 3.0}) {
    double p = m.Penalty(std::vector<double>{r * 0.6, r * 0.8});
    EXPECT_GT(p, previous);
    previous = p;
  }
}

TEST(DaePenaltyTest, WidthMismatchThrows) {
  DenoiserModel m(IdentityDenoiser(2), Normalizer::Identity(2), 0.1);
  EXPECT_THROW(m.Penalty(std::vector<double>{1.0}), ShapeError);
}

// ----------------------------------------------------------- GMM oracle --

TEST(GmmOracleTest, StandardNormalScore) {
  GaussianMixture1D single{{1.0}, {0.0}, {1.0}};
  for (double y : {-2.0, 0.0, 0.5, 3.0}) {
    GmmOracleValue v = GmmOracle(single, 0.0, y);
    EXPECT_DOUBLE_EQ(v.score, -y);
    EXPECT_NEAR(v.neg_log_density, 0.5 * y * y + 0.5 * std::log(2 * std::numbers::pi),
                1e-14);
  }
}

TEST(GmmOracleTest, SymmetricMixtureScoreZeroAtCenter) {
  EXPECT_EQ(GmmOracle(kTwoModes, 0.5, 0.0).score, 0.0);
}

TEST(GmmOracleTest, MatchesQuadratureOfConvolution) {
  for (double y : {-2.0, 2.0}) {
    GmmOracleValue exact = GmmOracle(kTwoModes, 0.5, y);
    GmmOracleValue quad = QuadratureOracle(kTwoModes, 0.5, y);
    EXPECT_NEAR(exact.neg_log_density, quad.neg_log_density, 1e-10);
    EXPECT_NEAR(exact.score, quad.score, 1e-10);
  }
}

TEST(GmmOracleTest, QuantilesBracketNinetyNinePercent) {
  double lo = GmmQuantile(kTwoModes, 0.5, 0.005);
  double hi = GmmQuantile(kTwoModes, 0.5, 0.995);
  EXPECT_NEAR(lo, -hi, 1e-9);
  EXPECT_GT(hi, 2.0);
  EXPECT_LT(hi, 5.0);
}

TEST(GmmOracleTest, InvalidMixtureRejected) {
  GaussianMixture1D bad{{0.6, 0.6}, {0, 1}, {1, 1}};
  EXPECT_THROW(GmmOracle(bad, 0.1, 0.0), ContractError);
}

}  // namespace
}  // namespace ebplan
