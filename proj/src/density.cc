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

#include "ebplan/density.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "ebplan/adam.h"
#include "ebplan/errors.h"
#include "batching.h"

namespace ebplan {
namespace {

using internal::GatherRows;
using internal::Split;
using internal::SplitHoldout;

void CheckPairs(const Tensor& clean, const Tensor& noisy) {
  if (clean.empty() || noisy.empty()) throw ContractError("empty batch");
  if (!clean.SameShape(noisy)) {
    throw ShapeError("clean and noisy batches differ in shape");
  }
}

double MeanSquaredRowNorm(std::span<const double> r, std::size_t rows) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s / static_cast<double>(rows);
}

void CheckTrainInputs(const Tensor& vectors, const DensityTrainConfig& c) {
  if (vectors.rank() != 2 || vectors.rows() < 2) {
    throw ContractError("density training needs at least 2 vectors");
  }
  if (c.epochs < 1 || c.batch_size < 1) {
    throw ConfigError("epochs and batch_size must be >= 1");
  }
  if (!(c.holdout_fraction >= 0.0 && c.holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must lie in [0, 1)");
  }
  vectors.CheckFinite("training vectors");
}

// Shared minibatch loop for the two denoising objectives. `taped_loss`
// builds the loss for one (clean, noisy) batch on a tape.
template <typename TapedLoss, typename EvalLoss>
NetworkParams FitDenoisingObjective(const Tensor& data, std::size_t out_width,
                                    const DensityTrainConfig& config,
                                    TrainingReport& report,
                                    TapedLoss taped_loss, EvalLoss eval_loss) {
  std::mt19937_64 rng(config.noise.seed);
  const std::size_t d = data.cols();
  Split split = SplitHoldout(data.rows(), config.holdout_fraction, rng);

  NetworkParams params;
  if (config.warm_start && config.warm_start->input_dim() == d &&
      config.warm_start->output_dim() == out_width) {
    params = *config.warm_start;
  } else {
    std::vector<std::size_t> widths = {d};
    widths.insert(widths.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    widths.push_back(out_width);
    params = InitNetwork(widths, config.activation, rng);
  }
  AdamState adam = AdamState::For(params, {.learning_rate = config.learning_rate});

  const Tensor val_clean = GatherRows(data, split.holdout);
  const Tensor val_noisy = Corrupt(val_clean, config.noise.sigma, rng);
  const Tensor train_clean = GatherRows(data, split.train);
  const std::size_t n = train_clean.rows();
  const std::size_t batch = std::min<std::size_t>(config.batch_size, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const Tensor train_noisy = Corrupt(train_clean, config.noise.sigma, rng);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      std::size_t count = std::min(batch, n - start);
      std::span<const std::size_t> idx(order.data() + start, count);
      Tensor clean = GatherRows(train_clean, idx);
      Tensor noisy = GatherRows(train_noisy, idx);
      ad::Tape tape;
      TapedNetwork net = LoadOnTape(tape, params);
      ad::Var loss = taped_loss(net, tape, clean, noisy);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError("density training diverged at epoch " +
                           std::to_string(epoch) + " (loss " +
                           std::to_string(value) + ")");
      }
      NetworkParams grads = ParamGradients(loss, net, params);
      AdamUpdate(params, grads, adam);
      loss_sum += value;
      ++steps;
    }
    report.train_loss.push_back(loss_sum / steps);
    report.validation_loss.push_back(eval_loss(params, val_clean, val_noisy));
  }
  return params;
}

}  // namespace

Tensor Corrupt(const Tensor& x, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  Tensor y = x;
  if (sigma == 0.0) return y;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : y.data()) v += sigma * normal(rng);
  return y;
}

Tensor Corrupt(const Tensor& x, const NoiseConfig& noise) {
  std::mt19937_64 rng(noise.seed);
  return Corrupt(x, noise.sigma, rng);
}

double DeenLoss(const NetworkParams& energy_net, const Tensor& clean,
                const Tensor& noisy, double sigma) {
  CheckPairs(clean, noisy);
  if (!(sigma > 0.0)) throw ContractError("DEEN loss needs sigma > 0");
  Tensor g = InputGradient(energy_net, noisy);
  std::vector<double> r(clean.size());
  const double s2 = sigma * sigma;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = clean[i] - noisy[i] + s2 * g[i];
  }
  return MeanSquaredRowNorm(r, clean.rows());
}

ad::Var TapedDeenLoss(const TapedNetwork& energy_net, ad::Tape& tape,
                      const Tensor& clean, const Tensor& noisy, double sigma) {
  CheckPairs(clean, noisy);
  if (!(sigma > 0.0)) throw ContractError("DEEN loss needs sigma > 0");
  ad::Var x = tape.Constant(clean);
  ad::Var y = tape.Variable(noisy);
  ad::Var grad = TapedInputGradient(energy_net, y);
  ad::Var residual = ad::Add(ad::Sub(x, y), ad::Scale(grad, sigma * sigma));
  return ad::Scale(ad::Sum(ad::Square(residual)),
                   1.0 / static_cast<double>(clean.rows()));
}

double DaeLoss(const NetworkParams& denoiser, const Tensor& clean,
               const Tensor& noisy) {
  CheckPairs(clean, noisy);
  Tensor out = Forward(denoiser, noisy);
  if (out.size() != clean.size()) {
    throw ShapeError("denoiser output width differs from input width");
  }
  std::vector<double> r(clean.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = out[i] - clean[i];
  return MeanSquaredRowNorm(r, clean.rows());
}

ad::Var TapedDaeLoss(const TapedNetwork& denoiser, ad::Tape& tape,
                     const Tensor& clean, const Tensor& noisy) {
  CheckPairs(clean, noisy);
  ad::Var out = TapedForward(denoiser, tape.Constant(noisy));
  ad::Var residual = ad::Sub(out, tape.Constant(clean));
  return ad::Scale(ad::Sum(ad::Square(residual)),
                   1.0 / static_cast<double>(clean.rows()));
}

// ---------------------------------------------------------------- models --

EnergyModel::EnergyModel(NetworkParams params, Normalizer normalizer,
                         double sigma)
    : params_(std::move(params)),
      normalizer_(std::move(normalizer)),
      sigma_(sigma),
      compiled_(params_) {
  if (params_.output_dim() != 1) {
    throw ContractError("energy network must have a scalar output");
  }
  if (params_.input_dim() != normalizer_.dim()) {
    throw ShapeError("energy network input width differs from normalizer");
  }
  for (double s : normalizer_.std) {
    if (!(s > 0.0)) throw ContractError("normalizer std must be positive");
  }
}

void EnergyModel::CheckInput(std::span<const double> v) const {
  if (v.size() != dim()) {
    throw ShapeError("energy model expects width " + std::to_string(dim()) +
                     ", got " + std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("non-finite energy input");
  }
}

double EnergyModel::Energy(std::span<const double> v) const {
  CheckInput(v);
  double e = 0.0;
  EnergyBatch(v, 1, std::span<double>(&e, 1));
  if (!std::isfinite(e)) throw NumericError("non-finite energy");
  return e;
}

std::vector<double> EnergyModel::Score(std::span<const double> v) const {
  CheckInput(v);
  std::vector<double> g(dim());
  EnergyGradientBatch(v, 1, g);
  for (double& x : g) {
    x = -x;
    if (!std::isfinite(x)) throw NumericError("non-finite score");
  }
  return g;
}

void EnergyModel::EnergyBatch(std::span<const double> in, std::size_t rows,
                              std::span<double> out) const {
  std::vector<double> z(rows * dim());
  normalizer_.NormalizeRows(in, rows, z);
  compiled_.Forward(z, rows, out);
}

void EnergyModel::EnergyGradientBatch(std::span<const double> in,
                                      std::size_t rows,
                                      std::span<double> grad) const {
  const std::size_t d = dim();
  std::vector<double> z(rows * d);
  normalizer_.NormalizeRows(in, rows, z);
  std::vector<double> ones(rows, 1.0);
  compiled_.VectorJacobianProduct(z, rows, ones, grad);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) grad[r * d + j] /= normalizer_.std[j];
  }
}

DenoiserModel::DenoiserModel(NetworkParams params, Normalizer normalizer,
                             double sigma)
    : params_(std::move(params)),
      normalizer_(std::move(normalizer)),
      sigma_(sigma),
      compiled_(params_) {
  if (params_.input_dim() != params_.output_dim()) {
    throw ShapeError("denoiser input and output widths differ");
  }
  if (params_.input_dim() != normalizer_.dim()) {
    throw ShapeError("denoiser width differs from normalizer");
  }
  for (double s : normalizer_.std) {
    if (!(s > 0.0)) throw ContractError("normalizer std must be positive");
  }
}

void DenoiserModel::CheckInput(std::span<const double> v) const {
  if (v.size() != dim()) {
    throw ShapeError("denoiser expects width " + std::to_string(dim()) +
                     ", got " + std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("non-finite denoiser input");
  }
}

std::vector<double> DenoiserModel::Denoise(std::span<const double> v) const {
  CheckInput(v);
  std::vector<double> z(dim()), g(dim()), out(dim());
  normalizer_.Normalize(v, z);
  compiled_.Forward(z, 1, g);
  normalizer_.Denormalize(g, out);
  return out;
}

double DenoiserModel::Penalty(std::span<const double> v) const {
  CheckInput(v);
  double p = 0.0;
  PenaltyBatch(v, 1, std::span<double>(&p, 1));
  if (!std::isfinite(p)) throw NumericError("non-finite denoiser penalty");
  return p;
}

std::vector<double> DenoiserModel::Score(std::span<const double> v) const {
  CheckInput(v);
  if (!(sigma_ > 0.0)) throw ContractError("denoiser score needs sigma > 0");
  std::vector<double> z(dim()), g(dim());
  normalizer_.Normalize(v, z);
  compiled_.Forward(z, 1, g);
  const double s2 = sigma_ * sigma_;
  for (std::size_t j = 0; j < dim(); ++j) {
    g[j] = (g[j] - z[j]) / s2 / normalizer_.std[j];
  }
  return g;
}

void DenoiserModel::PenaltyBatch(std::span<const double> in, std::size_t rows,
                                 std::span<double> out) const {
  const std::size_t d = dim();
  std::vector<double> z(rows * d), g(rows * d);
  normalizer_.NormalizeRows(in, rows, z);
  compiled_.Forward(z, rows, g);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double e = g[r * d + j] - z[r * d + j];
      s += e * e;
    }
    out[r] = s;
  }
}

void DenoiserModel::PenaltyGradientBatch(std::span<const double> in,
                                         std::size_t rows,
                                         std::span<double> grad) const {
  const std::size_t d = dim();
  std::vector<double> z(rows * d), g(rows * d);
  normalizer_.NormalizeRows(in, rows, z);
  compiled_.Forward(z, rows, g);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      grad[r * d + j] = -2.0 * (g[r * d + j] - z[r * d + j]) / normalizer_.std[j];
    }
  }
}

// -------------------------------------------------------------- training --

TrainedEnergy TrainDeen(const Tensor& vectors, const DensityTrainConfig& config) {
  CheckTrainInputs(vectors, config);
  if (!(config.noise.sigma > 0.0)) {
    throw ConfigError("DEEN training needs noise sigma > 0");
  }
  Normalizer normalizer = config.normalize ? Normalizer::Fit(vectors)
                                           : Normalizer::Identity(vectors.cols());
  TrainingReport report;
  report.degenerate_input = normalizer.degenerate;
  const double sigma = config.noise.sigma;
  NetworkParams params = FitDenoisingObjective(
      normalizer.NormalizeRows(vectors), 1, config, report,
      [sigma](const TapedNetwork& net, ad::Tape& tape, const Tensor& clean,
              const Tensor& noisy) {
        return TapedDeenLoss(net, tape, clean, noisy, sigma);
      },
      [sigma](const NetworkParams& p, const Tensor& clean, const Tensor& noisy) {
        return DeenLoss(p, clean, noisy, sigma);
      });
  return TrainedEnergy{EnergyModel(std::move(params), std::move(normalizer), sigma),
                       std::move(report)};
}

TrainedDenoiser TrainDae(const Tensor& vectors, const DensityTrainConfig& config) {
  CheckTrainInputs(vectors, config);
  if (!(config.noise.sigma > 0.0)) {
    throw ConfigError("DAE training needs noise sigma > 0");
  }
  Normalizer normalizer = config.normalize ? Normalizer::Fit(vectors)
                                           : Normalizer::Identity(vectors.cols());
  TrainingReport report;
  report.degenerate_input = normalizer.degenerate;
  NetworkParams params = FitDenoisingObjective(
      normalizer.NormalizeRows(vectors), vectors.cols(), config, report,
      [](const TapedNetwork& net, ad::Tape& tape, const Tensor& clean,
         const Tensor& noisy) { return TapedDaeLoss(net, tape, clean, noisy); },
      [](const NetworkParams& p, const Tensor& clean, const Tensor& noisy) {
        return DaeLoss(p, clean, noisy);
      });
  return TrainedDenoiser{
      DenoiserModel(std::move(params), std::move(normalizer), config.noise.sigma),
      std::move(report)};
}

// --------------------------------------------------------------- mixture --

void GaussianMixture1D::Validate() const {
  if (weights.empty() || weights.size() != means.size() ||
      weights.size() != stddevs.size()) {
    throw ContractError("mixture lists must be non-empty and of equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !(stddevs[i] > 0.0) || !std::isfinite(means[i])) {
      throw ContractError("mixture weights and stddevs must be positive");
    }
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ContractError("mixture weights must sum to 1");
  }
}

std::vector<double> GaussianMixture1D::Sample(std::size_t n,
                                              std::mt19937_64& rng) const {
  Validate();
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (double& x : out) {
    std::size_t k = pick(rng);
    x = means[k] + stddevs[k] * normal(rng);
  }
  return out;
}

GmmOracleValue GmmOracle(const GaussianMixture1D& mix, double sigma, double y) {
  mix.Validate();
  const std::size_t k = mix.weights.size();
  std::vector<double> log_terms(k), slopes(k);
  double max_term = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const double var = mix.stddevs[i] * mix.stddevs[i] + sigma * sigma;
    const double diff = y - mix.means[i];
    log_terms[i] = std::log(mix.weights[i]) -
                   0.5 * std::log(2.0 * std::numbers::pi * var) -
                   0.5 * diff * diff / var;
    slopes[i] = -diff / var;
    max_term = std::max(max_term, log_terms[i]);
  }
  double total = 0.0, weighted_slope = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = std::exp(log_terms[i] - max_term);
    total += w;
    weighted_slope += w * slopes[i];
  }
  return GmmOracleValue{-(max_term + std::log(total)), weighted_slope / total};
}

double GmmQuantile(const GaussianMixture1D& mix, double sigma, double q) {
  mix.Validate();
  if (!(q > 0.0 && q < 1.0)) throw ContractError("quantile must lie in (0, 1)");
  auto cdf = [&](double y) {
    double c = 0.0;
    for (std::size_t i = 0; i < mix.weights.size(); ++i) {
      const double s = std::sqrt(mix.stddevs[i] * mix.stddevs[i] + sigma * sigma);
      c += mix.weights[i] * 0.5 *
           std::erfc(-(y - mix.means[i]) / (s * std::numbers::sqrt2));
    }
    return c;
  };
  double spread = sigma;
  for (double s : mix.stddevs) spread = std::max(spread, s);
  double lo = *std::min_element(mix.means.begin(), mix.means.end()) - 40.0 * spread;
  double hi = *std::max_element(mix.means.begin(), mix.means.end()) + 40.0 * spread;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ebplan
