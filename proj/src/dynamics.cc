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

#include "ebplan/dynamics.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "ebplan/adam.h"
#include "ebplan/errors.h"
#include "batching.h"

namespace ebplan {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Tensor ConcatColumns(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.row(r).data(), a.cols(), out.row(r).data());
    std::copy_n(b.row(r).data(), b.cols(), out.row(r).data() + a.cols());
  }
  return out;
}

Tensor Deltas(const TransitionBatch& batch) {
  Tensor d = batch.next_states;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= batch.states[i];
  return d;
}

// NLL of normalized targets given the raw network output (mean, log-variance).
double NormalizedNll(const CompiledNetwork& net, const Tensor& inputs,
                     const Tensor& targets, const LogVarianceBounds& bounds) {
  const std::size_t rows = inputs.rows(), ds = targets.cols();
  std::vector<double> out(rows * 2 * ds);
  net.Forward(inputs.data(), rows, out);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ds; ++j) {
      const double mu = out[r * 2 * ds + j];
      const double lv = SoftClampLogVariance(out[r * 2 * ds + ds + j], bounds);
      const double e = targets(r, j) - mu;
      total += 0.5 * (kLog2Pi + lv + e * e * std::exp(-lv));
    }
  }
  return total / static_cast<double>(rows * ds);
}

double NormalizedRmse(const CompiledNetwork& net, const Tensor& inputs,
                      const Tensor& targets) {
  const std::size_t rows = inputs.rows(), ds = targets.cols();
  std::vector<double> out(rows * 2 * ds);
  net.Forward(inputs.data(), rows, out);
  double se = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ds; ++j) {
      const double e = targets(r, j) - out[r * 2 * ds + j];
      se += e * e;
    }
  }
  return std::sqrt(se / static_cast<double>(rows * ds));
}

}  // namespace

void TransitionBatch::Validate() const {
  if (states.empty()) throw ContractError("transition batch is empty");
  if (states.rank() != 2 || actions.rank() != 2 || next_states.rank() != 2 ||
      actions.rows() != states.rows() || !next_states.SameShape(states)) {
    throw ShapeError("transition batch arrays are inconsistent");
  }
  states.CheckFinite("transition states");
  actions.CheckFinite("transition actions");
  next_states.CheckFinite("transition next states");
}

double SoftClampLogVariance(double raw, const LogVarianceBounds& b) {
  const double upper = b.upper - SoftplusValue(b.upper - raw);
  return b.lower + SoftplusValue(upper - b.lower);
}

// ---------------------------------------------------------------- model --

DynamicsModel::DynamicsModel(NetworkParams params, Normalizer input_normalizer,
                             Normalizer output_normalizer, LogVarianceBounds bounds)
    : params_(std::move(params)),
      input_normalizer_(std::move(input_normalizer)),
      output_normalizer_(std::move(output_normalizer)),
      bounds_(bounds) {
  params_.Validate();
  if (!(bounds_.lower < bounds_.upper)) {
    throw ConfigError("log-variance bounds need lower < upper");
  }
  const std::size_t ds = output_normalizer_.dim();
  if (ds == 0 || input_normalizer_.dim() <= ds ||
      params_.input_dim() != input_normalizer_.dim() || params_.output_dim() != 2 * ds) {
    throw ShapeError("dynamics network must map (s, a) to 2 * dim(s) outputs");
  }
  action_dim_ = input_normalizer_.dim() - ds;
  compiled_ = CompiledNetwork(params_);
}

void DynamicsModel::NormalizeInputs(std::span<const double> states,
                                    std::span<const double> actions,
                                    std::size_t rows, std::vector<double>& out) const {
  const std::size_t ds = state_dim(), da = action_dim_, w = ds + da;
  out.resize(rows * w);
  const Normalizer& n = input_normalizer_;
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * w;
    const double* s = states.data() + r * ds;
    const double* a = actions.data() + r * da;
    for (std::size_t j = 0; j < ds; ++j) o[j] = (s[j] - n.mean[j]) / n.std[j];
    for (std::size_t j = 0; j < da; ++j) {
      o[ds + j] = (a[j] - n.mean[ds + j]) / n.std[ds + j];
    }
  }
}

Prediction DynamicsModel::Predict(std::span<const double> state,
                                  std::span<const double> action) const {
  const std::size_t ds = state_dim();
  if (state.size() != ds || action.size() != action_dim_) {
    throw ShapeError("dynamics input has the wrong width");
  }
  for (double v : state) {
    if (!std::isfinite(v)) throw NumericError("non-finite state");
  }
  for (double v : action) {
    if (!std::isfinite(v)) throw NumericError("non-finite action");
  }
  std::vector<double> in;
  NormalizeInputs(state, action, 1, in);
  std::vector<double> out(2 * ds);
  compiled_.Forward(in, 1, out);
  Prediction p{std::vector<double>(ds), std::vector<double>(ds)};
  const Normalizer& o = output_normalizer_;
  for (std::size_t j = 0; j < ds; ++j) {
    p.mean[j] = state[j] + (out[j] * o.std[j] + o.mean[j]);
    const double lv = std::clamp(SoftClampLogVariance(out[ds + j], bounds_),
                                 bounds_.lower, bounds_.upper);
    p.variance[j] = std::exp(lv);
  }
  return p;
}

void DynamicsModel::PredictMeanBatch(std::span<const double> states,
                                     std::span<const double> actions,
                                     std::size_t rows, std::span<double> next) const {
  const std::size_t ds = state_dim();
  thread_local std::vector<double> in, out;
  NormalizeInputs(states, actions, rows, in);
  out.resize(rows * 2 * ds);
  compiled_.Forward(in, rows, out);
  const Normalizer& o = output_normalizer_;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ds; ++j) {
      next[r * ds + j] = states[r * ds + j] + (out[r * 2 * ds + j] * o.std[j] + o.mean[j]);
    }
  }
}

void DynamicsModel::MeanVectorJacobianProduct(std::span<const double> states,
                                              std::span<const double> actions,
                                              std::size_t rows,
                                              std::span<const double> cotangent,
                                              std::span<double> grad_states,
                                              std::span<double> grad_actions) const {
  const std::size_t ds = state_dim(), da = action_dim_, w = ds + da;
  std::vector<double> in;
  NormalizeInputs(states, actions, rows, in);
  std::vector<double> cot(rows * 2 * ds, 0.0), grad_in(rows * w);
  const Normalizer& o = output_normalizer_;
  const Normalizer& n = input_normalizer_;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ds; ++j) {
      cot[r * 2 * ds + j] = cotangent[r * ds + j] * o.std[j];
    }
  }
  compiled_.VectorJacobianProduct(in, rows, cot, grad_in);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ds; ++j) {
      grad_states[r * ds + j] = cotangent[r * ds + j] + grad_in[r * w + j] / n.std[j];
    }
    for (std::size_t j = 0; j < da; ++j) {
      grad_actions[r * da + j] = grad_in[r * w + ds + j] / n.std[ds + j];
    }
  }
}

// ----------------------------------------------------------------- loss --

double NllLoss(const DynamicsModel& model, const TransitionBatch& batch) {
  batch.Validate();
  if (batch.states.cols() != model.state_dim() ||
      batch.actions.cols() != model.action_dim()) {
    throw ShapeError("transition batch does not match the dynamics model");
  }
  Tensor inputs = model.input_normalizer().NormalizeRows(
      ConcatColumns(batch.states, batch.actions));
  Tensor targets = model.output_normalizer().NormalizeRows(Deltas(batch));
  return NormalizedNll(CompiledNetwork(model.params()), inputs, targets, model.bounds());
}

ad::Var TapedNllLoss(const TapedNetwork& net, ad::Tape& tape,
                     const Tensor& normalized_inputs,
                     const Tensor& normalized_targets,
                     const LogVarianceBounds& b) {
  const std::size_t ds = normalized_targets.cols();
  ad::Var out = TapedForward(net, tape.Constant(normalized_inputs));
  ad::Var mu = ad::ColumnSlice(out, 0, ds);
  ad::Var raw = ad::ColumnSlice(out, ds, ds);
  ad::Var upper = ad::Affine(ad::Softplus(ad::Affine(raw, -1.0, b.upper)), -1.0, b.upper);
  ad::Var lv = ad::Affine(ad::Softplus(ad::Affine(upper, 1.0, -b.lower)), 1.0, b.lower);
  ad::Var err = ad::Sub(tape.Constant(normalized_targets), mu);
  ad::Var quad = ad::Mul(ad::Square(err), ad::Exp(ad::Scale(lv, -1.0)));
  ad::Var total = ad::Sum(ad::Add(lv, quad));
  const double count = static_cast<double>(normalized_targets.size());
  return ad::Affine(total, 0.5 / count, 0.5 * kLog2Pi);
}

// ------------------------------------------------------------- training --

TrainedDynamics TrainDynamics(const TransitionBatch& batch,
                              const DynamicsTrainConfig& config) {
  batch.Validate();
  if (batch.size() < 2) {
    throw ContractError("dynamics training needs at least 2 transitions");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw ConfigError("epochs and batch_size must be >= 1");
  }
  if (!(config.holdout_fraction >= 0.0 && config.holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must lie in [0, 1)");
  }
  const std::size_t ds = batch.states.cols();
  Tensor raw_inputs = ConcatColumns(batch.states, batch.actions);
  Tensor raw_targets = Deltas(batch);
  Normalizer in_norm = Normalizer::Fit(raw_inputs);
  Normalizer out_norm = Normalizer::Fit(raw_targets);
  DynamicsReport report;
  report.degenerate_input = in_norm.degenerate || out_norm.degenerate;
  const Tensor inputs = in_norm.NormalizeRows(raw_inputs);
  const Tensor targets = out_norm.NormalizeRows(raw_targets);

  std::mt19937_64 rng(config.seed);
  internal::Split split = internal::SplitHoldout(batch.size(), config.holdout_fraction, rng);
  NetworkParams params;
  if (config.warm_start && config.warm_start->input_dim() == inputs.cols() &&
      config.warm_start->output_dim() == 2 * ds) {
    params = *config.warm_start;
  } else {
    std::vector<std::size_t> widths = {inputs.cols()};
    widths.insert(widths.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    widths.push_back(2 * ds);
    params = InitNetwork(widths, config.activation, rng);
  }
  AdamState adam = AdamState::For(params, {.learning_rate = config.learning_rate});

  const Tensor val_in = internal::GatherRows(inputs, split.holdout);
  const Tensor val_out = internal::GatherRows(targets, split.holdout);
  const Tensor train_in = internal::GatherRows(inputs, split.train);
  const Tensor train_out = internal::GatherRows(targets, split.train);
  report.initial_holdout_rmse = NormalizedRmse(CompiledNetwork(params), val_in, val_out);

  const std::size_t n = train_in.rows();
  const std::size_t bsz = std::min<std::size_t>(config.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < n; start += bsz) {
      std::span<const std::size_t> idx(order.data() + start, std::min(bsz, n - start));
      ad::Tape tape;
      TapedNetwork net = LoadOnTape(tape, params);
      ad::Var loss = TapedNllLoss(net, tape, internal::GatherRows(train_in, idx),
                                  internal::GatherRows(train_out, idx), config.bounds);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError("dynamics training diverged at epoch " +
                           std::to_string(epoch) + " (loss " + std::to_string(value) + ")");
      }
      AdamUpdate(params, ParamGradients(loss, net, params), adam);
      loss_sum += value;
      ++steps;
    }
    report.train_nll.push_back(loss_sum / steps);
    report.holdout_nll.push_back(
        NormalizedNll(CompiledNetwork(params), val_in, val_out, config.bounds));
  }
  CompiledNetwork final_net(params);
  report.holdout_rmse = NormalizedRmse(final_net, val_in, val_out);
  return TrainedDynamics{
      DynamicsModel(std::move(params), std::move(in_norm), std::move(out_norm), config.bounds),
      std::move(report)};
}

// -------------------------------------------------------------- rollout --

Tensor Rollout(const Predictor& predictor, std::span<const double> s0,
               const Tensor& actions) {
  const std::size_t ds = predictor.state_dim(), da = predictor.action_dim();
  if (s0.size() != ds || actions.rank() != 2 || actions.cols() != da ||
      actions.rows() == 0) {
    throw ShapeError("rollout needs a state of width " + std::to_string(ds) +
                     " and (H + 1) x " + std::to_string(da) + " actions");
  }
  Tensor states(actions.rows(), ds);
  std::vector<double> current(s0.begin(), s0.end());
  for (std::size_t t = 0; t < actions.rows(); ++t) {
    predictor.PredictMeanBatch(current, actions.row(t), 1, states.row(t));
    for (double v : states.row(t)) {
      if (!std::isfinite(v)) {
        throw RolloutError("rollout produced a non-finite state at step " +
                               std::to_string(t),
                           t);
      }
    }
    std::copy_n(states.row(t).data(), ds, current.data());
  }
  return states;
}

}  // namespace ebplan
