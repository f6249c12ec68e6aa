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

#ifndef EBPLAN_DENSITY_H_
#define EBPLAN_DENSITY_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ebplan/activation.h"
#include "ebplan/autodiff.h"
#include "ebplan/network.h"
#include "ebplan/normalizer.h"
#include "ebplan/tensor.h"

namespace ebplan {

struct NoiseConfig {
  double sigma = 0.1;  // in normalized-input units
  std::uint64_t seed = 0;
};

// y = x + sigma * z with z ~ N(0, I), elementwise.
Tensor Corrupt(const Tensor& x, double sigma, std::mt19937_64& rng);
Tensor Corrupt(const Tensor& x, const NoiseConfig& noise);

// Mean over pairs of ||x_i - y_i + sigma^2 dE(y_i)/dy||^2 (`energy_net` must
// have a scalar output). Rows of `clean` and `noisy` are paired.
double DeenLoss(const NetworkParams& energy_net, const Tensor& clean,
                const Tensor& noisy, double sigma);
ad::Var TapedDeenLoss(const TapedNetwork& energy_net, ad::Tape& tape,
                      const Tensor& clean, const Tensor& noisy, double sigma);

// Mean over pairs of ||g(y_i) - x_i||^2.
double DaeLoss(const NetworkParams& denoiser, const Tensor& clean,
               const Tensor& noisy);
ad::Var TapedDaeLoss(const TapedNetwork& denoiser, ad::Tape& tape,
                     const Tensor& clean, const Tensor& noisy);

struct DensityTrainConfig {
  NoiseConfig noise;
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::vector<std::size_t> hidden_sizes = {64, 64};
  Activation activation = Activation::kSoftplus;
  // z-score inputs before corruption; sigma is then in normalized units.
  bool normalize = true;
  double holdout_fraction = 0.1;
  // Continue from these weights instead of a fresh initialization.
  std::optional<NetworkParams> warm_start;
};

struct TrainingReport {
  std::vector<double> train_loss;       // mean minibatch loss per epoch
  std::vector<double> validation_loss;  // fixed corruption, per epoch
  bool degenerate_input = false;        // normalizer substituted std = 1
};

// Scalar energy of a transition vector. Immutable; safe to share between
// threads.
class EnergyModel {
 public:
  EnergyModel(NetworkParams params, Normalizer normalizer, double sigma);

  const NetworkParams& params() const { return params_; }
  const Normalizer& normalizer() const { return normalizer_; }
  double sigma() const { return sigma_; }
  std::size_t dim() const { return normalizer_.dim(); }

  double Energy(std::span<const double> v) const;
  // -dE/dv in raw (unnormalized) coordinates.
  std::vector<double> Score(std::span<const double> v) const;
  // Unchecked batch form for planning: `in` is rows x dim, `out` rows.
  void EnergyBatch(std::span<const double> in, std::size_t rows,
                   std::span<double> out) const;
  // dE/dv for each row (raw coordinates), unchecked.
  void EnergyGradientBatch(std::span<const double> in, std::size_t rows,
                           std::span<double> grad) const;

  friend bool operator==(const EnergyModel& a, const EnergyModel& b) {
    return a.params_ == b.params_ && a.normalizer_ == b.normalizer_ &&
           a.sigma_ == b.sigma_;
  }

 private:
  void CheckInput(std::span<const double> v) const;

  NetworkParams params_;
  Normalizer normalizer_;
  double sigma_;
  CompiledNetwork compiled_;
};

// Denoising autoencoder; its residual g(y) - y approximates sigma^2 times the
// score of the corrupted distribution.
class DenoiserModel {
 public:
  DenoiserModel(NetworkParams params, Normalizer normalizer, double sigma);

  const NetworkParams& params() const { return params_; }
  const Normalizer& normalizer() const { return normalizer_; }
  double sigma() const { return sigma_; }
  std::size_t dim() const { return normalizer_.dim(); }

  // g applied in normalized space and mapped back to raw coordinates.
  std::vector<double> Denoise(std::span<const double> v) const;
  // ||g(z) - z||^2 with z the normalized input.
  double Penalty(std::span<const double> v) const;
  // (g(z) - z) / sigma^2, mapped to raw coordinates.
  std::vector<double> Score(std::span<const double> v) const;
  void PenaltyBatch(std::span<const double> in, std::size_t rows,
                    std::span<double> out) const;
  // Gradient of the penalty with the denoiser output held fixed, raw
  // coordinates: -2 (g(z) - z) / std.
  void PenaltyGradientBatch(std::span<const double> in, std::size_t rows,
                            std::span<double> grad) const;

  friend bool operator==(const DenoiserModel& a, const DenoiserModel& b) {
    return a.params_ == b.params_ && a.normalizer_ == b.normalizer_ &&
           a.sigma_ == b.sigma_;
  }

 private:
  void CheckInput(std::span<const double> v) const;

  NetworkParams params_;
  Normalizer normalizer_;
  double sigma_;
  CompiledNetwork compiled_;
};

struct TrainedEnergy {
  EnergyModel model;
  TrainingReport report;
};

struct TrainedDenoiser {
  DenoiserModel model;
  TrainingReport report;
};

// Rows of `vectors` are training samples. Fresh corruption every epoch.
TrainedEnergy TrainDeen(const Tensor& vectors, const DensityTrainConfig& config);
TrainedDenoiser TrainDae(const Tensor& vectors, const DensityTrainConfig& config);

struct GaussianMixture1D {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stddevs;

  // Throws ContractError unless weights are positive and sum to 1 and all
  // lists have equal non-zero length with positive stddevs.
  void Validate() const;
  std::vector<double> Sample(std::size_t n, std::mt19937_64& rng) const;
};

struct GmmOracleValue {
  double neg_log_density = 0.0;
  double score = 0.0;  // d log p / dy
};

// Exact values for the mixture convolved with N(0, sigma^2).
GmmOracleValue GmmOracle(const GaussianMixture1D& mix, double sigma, double y);
// Quantile of the corrupted mixture by bisection on its CDF.
double GmmQuantile(const GaussianMixture1D& mix, double sigma, double q);

}  // namespace ebplan

#endif  // EBPLAN_DENSITY_H_
