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

#ifndef EBPLAN_DYNAMICS_H_
#define EBPLAN_DYNAMICS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ebplan/activation.h"
#include "ebplan/autodiff.h"
#include "ebplan/network.h"
#include "ebplan/normalizer.h"
#include "ebplan/predictor.h"
#include "ebplan/tensor.h"

namespace ebplan {

// Rows are paired (s, a, s') samples.
struct TransitionBatch {
  Tensor states;
  Tensor actions;
  Tensor next_states;

  std::size_t size() const { return states.rows(); }
  // Throws ContractError if empty, ShapeError on inconsistent widths or
  // counts, NumericError on non-finite entries.
  void Validate() const;
};

// Bounds on the log-variance head in normalized delta units.
struct LogVarianceBounds {
  double lower = -10.0;
  double upper = 4.0;

  friend bool operator==(const LogVarianceBounds&, const LogVarianceBounds&) = default;
};

// Smooth clamp of a raw log-variance into [lower, upper] (softplus on both
// sides), as used by the training loss.
double SoftClampLogVariance(double raw, const LogVarianceBounds& bounds);

// f(s, a) = s + denormalized delta head. The network maps the normalized
// (s, a) to [delta mean, raw log-variance], each state_dim wide.
class DynamicsModel final : public Predictor {
 public:
  DynamicsModel(NetworkParams params, Normalizer input_normalizer,
                Normalizer output_normalizer, LogVarianceBounds bounds = {});

  const NetworkParams& params() const { return params_; }
  const Normalizer& input_normalizer() const { return input_normalizer_; }
  const Normalizer& output_normalizer() const { return output_normalizer_; }
  const LogVarianceBounds& bounds() const { return bounds_; }

  std::size_t state_dim() const override { return output_normalizer_.dim(); }
  std::size_t action_dim() const override { return action_dim_; }

  // `variance` is that of the normalized state delta, so it always lies in
  // [exp(lower), exp(upper)]; multiply by output_normalizer().std^2 for raw
  // units.
  Prediction Predict(std::span<const double> state,
                     std::span<const double> action) const override;
  void PredictMeanBatch(std::span<const double> states,
                        std::span<const double> actions, std::size_t rows,
                        std::span<double> next) const override;

  // For each row, the cotangent of the predicted mean pulled back to the
  // state and action: d(c . f(s, a)). Unchecked batch form.
  void MeanVectorJacobianProduct(std::span<const double> states,
                                 std::span<const double> actions,
                                 std::size_t rows,
                                 std::span<const double> cotangent,
                                 std::span<double> grad_states,
                                 std::span<double> grad_actions) const;

  friend bool operator==(const DynamicsModel& a, const DynamicsModel& b) {
    return a.params_ == b.params_ && a.input_normalizer_ == b.input_normalizer_ &&
           a.output_normalizer_ == b.output_normalizer_ && a.bounds_ == b.bounds_;
  }

 private:
  void NormalizeInputs(std::span<const double> states,
                       std::span<const double> actions, std::size_t rows,
                       std::vector<double>& out) const;

  NetworkParams params_;
  Normalizer input_normalizer_;
  Normalizer output_normalizer_;
  LogVarianceBounds bounds_;
  std::size_t action_dim_ = 0;
  CompiledNetwork compiled_;
};

// Mean over rows and state dimensions of the Gaussian negative log-likelihood
// of the normalized delta under the model's mean and (soft-clamped)
// log-variance heads.
double NllLoss(const DynamicsModel& model, const TransitionBatch& batch);
ad::Var TapedNllLoss(const TapedNetwork& net, ad::Tape& tape,
                     const Tensor& normalized_inputs,
                     const Tensor& normalized_targets,
                     const LogVarianceBounds& bounds);

struct DynamicsTrainConfig {
  std::vector<std::size_t> hidden_sizes = {64, 64};
  Activation activation = Activation::kSoftplus;
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.1;
  LogVarianceBounds bounds;
  std::optional<NetworkParams> warm_start;
};

struct DynamicsReport {
  std::vector<double> train_nll;    // mean minibatch NLL per epoch
  std::vector<double> holdout_nll;  // per epoch
  double initial_holdout_rmse = 0.0;  // normalized delta, before training
  double holdout_rmse = 0.0;          // normalized delta, after training
  bool degenerate_input = false;
};

struct TrainedDynamics {
  DynamicsModel model;
  DynamicsReport report;
};

// Fits normalizers on the batch, then shuffled minibatch Adam on the NLL.
// Throws ContractError for fewer than 2 transitions and NumericError if the
// loss becomes non-finite.
TrainedDynamics TrainDynamics(const TransitionBatch& batch,
                              const DynamicsTrainConfig& config);

}  // namespace ebplan

#endif  // EBPLAN_DYNAMICS_H_
