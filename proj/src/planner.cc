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

#include "ebplan/planner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "ebplan/errors.h"
#include "ebplan/random.h"

namespace ebplan {
namespace {

constexpr double kInvalid = -std::numeric_limits<double>::infinity();

// Evaluate `count` candidates, split into contiguous chunks across threads.
// Candidates are row-independent, so the split cannot change any value.
void EvaluateParallel(const CandidateEvaluator& evaluator,
                      std::span<const double> candidates, std::size_t count,
                      std::size_t steps, std::size_t width, int threads,
                      std::span<ObjectiveValue> out) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    evaluator.EvaluateBatch(candidates, count, steps, out);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t begin = 0; begin < count; begin += chunk) {
    const std::size_t n = std::min(chunk, count - begin);
    pool.emplace_back([&, begin, n] {
      evaluator.EvaluateBatch(candidates.subspan(begin * width, n * width), n, steps,
                              out.subspan(begin, n));
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace

std::string_view RegularizerName(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::kDeen:
      return "deen";
    case RegularizerKind::kDae:
      return "dae";
    case RegularizerKind::kNone:
      break;
  }
  return "none";
}

RegularizerKind ParseRegularizer(std::string_view name) {
  if (name == "none") return RegularizerKind::kNone;
  if (name == "deen") return RegularizerKind::kDeen;
  if (name == "dae") return RegularizerKind::kDae;
  throw ConfigError("unknown regularizer '" + std::string(name) + "'");
}

// ---------------------------------------------------------- regularizer --

Regularizer::Regularizer(std::shared_ptr<const EnergyModel> energy)
    : kind_(RegularizerKind::kDeen), energy_(std::move(energy)) {
  if (!energy_) throw ContractError("null energy model");
}

Regularizer::Regularizer(std::shared_ptr<const DenoiserModel> denoiser)
    : kind_(RegularizerKind::kDae), denoiser_(std::move(denoiser)) {
  if (!denoiser_) throw ContractError("null denoiser model");
}

std::size_t Regularizer::dim() const {
  if (energy_) return energy_->dim();
  if (denoiser_) return denoiser_->dim();
  return 0;
}

void Regularizer::PenaltyBatch(std::span<const double> in, std::size_t rows,
                               std::span<double> out) const {
  switch (kind_) {
    case RegularizerKind::kDeen:
      energy_->EnergyBatch(in, rows, out);
      return;
    case RegularizerKind::kDae:
      denoiser_->PenaltyBatch(in, rows, out);
      return;
    case RegularizerKind::kNone:
      break;
  }
  std::fill_n(out.begin(), rows, 0.0);
}

void Regularizer::PenaltyGradientBatch(std::span<const double> in, std::size_t rows,
                                       std::span<double> grad) const {
  switch (kind_) {
    case RegularizerKind::kDeen:
      energy_->EnergyGradientBatch(in, rows, grad);
      return;
    case RegularizerKind::kDae:
      denoiser_->PenaltyGradientBatch(in, rows, grad);
      return;
    case RegularizerKind::kNone:
      break;
  }
  std::fill(grad.begin(), grad.end(), 0.0);
}

// ------------------------------------------------------------ objective --

TrajectoryObjective::TrajectoryObjective(const Predictor& predictor,
                                         const Regularizer& regularizer,
                                         const Environment& env, double alpha,
                                         std::span<const double> s0)
    : predictor_(predictor),
      regularizer_(regularizer),
      env_(env),
      alpha_(alpha),
      s0_(s0.begin(), s0.end()) {
  const std::size_t ds = predictor.state_dim(), da = predictor.action_dim();
  if (env.spec().state_dim != ds || env.spec().action_dim != da || s0.size() != ds) {
    throw ShapeError("predictor, environment and state disagree on dimensions");
  }
  if (regularizer.kind() != RegularizerKind::kNone && regularizer.dim() != 2 * ds + da) {
    throw ShapeError("regularizer expects transition vectors of width " +
                     std::to_string(regularizer.dim()) + ", planner builds " +
                     std::to_string(2 * ds + da));
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("energy weight alpha must be finite and >= 0");
  }
  for (double v : s0) {
    if (!std::isfinite(v)) throw NumericError("non-finite planning state");
  }
}

void TrajectoryObjective::EvaluateBatch(std::span<const double> candidates,
                                        std::size_t count, std::size_t steps,
                                        std::span<ObjectiveValue> out) const {
  const std::size_t ds = predictor_.state_dim(), da = predictor_.action_dim();
  const std::size_t dt = 2 * ds + da;
  const bool penalize = regularizer_.kind() != RegularizerKind::kNone;
  std::vector<double> state(count * ds), next(count * ds), act(count * da);
  std::vector<double> transition(penalize ? count * dt : 0), penalty(count, 0.0);
  std::vector<double> reward(count, 0.0), pen_sum(count, 0.0);
  std::vector<char> valid(count, 1);
  for (std::size_t i = 0; i < count; ++i) std::copy(s0_.begin(), s0_.end(), &state[i * ds]);

  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < count; ++i) {
      std::copy_n(&candidates[(i * steps + t) * da], da, &act[i * da]);
    }
    predictor_.PredictMeanBatch(state, act, count, next);
    if (penalize) {
      for (std::size_t i = 0; i < count; ++i) {
        double* row = &transition[i * dt];
        std::copy_n(&state[i * ds], ds, row);
        std::copy_n(&act[i * da], da, row + ds);
        std::copy_n(&next[i * ds], ds, row + ds + da);
      }
      regularizer_.PenaltyBatch(transition, count, penalty);
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (!valid[i]) continue;
      const std::span<const double> s(&state[i * ds], ds), a(&act[i * da], da);
      reward[i] += env_.Reward(s, a);
      pen_sum[i] += penalty[i];
      for (std::size_t j = 0; j < ds; ++j) {
        if (!std::isfinite(next[i * ds + j])) valid[i] = 0;
      }
      if (!std::isfinite(reward[i]) || !std::isfinite(pen_sum[i])) valid[i] = 0;
    }
    state.swap(next);
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!valid[i]) {
      out[i] = ObjectiveValue{kInvalid, kInvalid, kInvalid};
      continue;
    }
    // alpha = 0 must reproduce the unregularized objective bit for bit.
    const double value = alpha_ == 0.0 ? reward[i] : reward[i] - alpha_ * pen_sum[i];
    out[i] = ObjectiveValue{value, reward[i], pen_sum[i]};
  }
}

ObjectiveValue TrajectoryObjective::Evaluate(const Tensor& actions) const {
  if (actions.rank() != 2 || actions.cols() != action_dim() || actions.rows() == 0) {
    throw ShapeError("objective needs an (H + 1) x " + std::to_string(action_dim()) +
                     " action sequence");
  }
  ObjectiveValue v;
  EvaluateBatch(actions.data(), 1, actions.rows(), std::span<ObjectiveValue>(&v, 1));
  return v;
}

// --------------------------------------------------------------- config --

void PlannerConfig::Validate(std::size_t action_dim) const {
  if (horizon < 0) throw ConfigError("horizon must be >= 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
  if (population < 1) throw ConfigError("population must be >= 1");
  if (elites < 1 || elites > population) {
    throw ConfigError("elites must lie in [1, population]");
  }
  if (iterations < 1) throw ConfigError("CEM iterations must be >= 1");
  if (!(std_floor > 0.0)) throw ConfigError("std floor must be > 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw ConfigError("planner bounds must have one entry per action dimension");
  }
  for (std::size_t j = 0; j < action_dim; ++j) {
    if (!(action_low[j] < action_high[j])) throw ConfigError("planner bounds need low < high");
  }
  if (!init_std.empty()) {
    if (init_std.size() != action_dim) throw ConfigError("init_std has the wrong width");
    for (double s : init_std) {
      if (!(s > 0.0)) throw ConfigError("init_std must be > 0");
    }
  }
}

PlannerConfig PlannerConfig::WithBounds(const EnvSpec& spec) const {
  PlannerConfig c = *this;
  if (c.action_low.empty()) c.action_low = spec.action_low;
  if (c.action_high.empty()) c.action_high = spec.action_high;
  return c;
}

Tensor DefaultWarmStart(const PlannerConfig& config, std::size_t action_dim) {
  Tensor t(static_cast<std::size_t>(config.horizon) + 1, action_dim);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t j = 0; j < action_dim; ++j) {
      t(r, j) = 0.5 * (config.action_low[j] + config.action_high[j]);
    }
  }
  return t;
}

// ------------------------------------------------------------------ CEM --

PlanResult CemPlan(const CandidateEvaluator& evaluator, const PlannerConfig& config,
                   std::size_t action_dim, const std::optional<Tensor>& warm_start,
                   std::uint64_t timestep) {
  config.Validate(action_dim);
  const std::size_t steps = static_cast<std::size_t>(config.horizon) + 1;
  const std::size_t width = steps * action_dim;
  const std::size_t n = static_cast<std::size_t>(config.population);
  const std::size_t k = static_cast<std::size_t>(config.elites);

  Tensor mean = warm_start ? *warm_start : DefaultWarmStart(config, action_dim);
  if (mean.rank() != 2 || mean.rows() != steps || mean.cols() != action_dim) {
    throw ShapeError("warm start must be (H + 1) x action_dim");
  }
  std::vector<double> stddev(width);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < action_dim; ++j) {
      stddev[t * action_dim + j] =
          config.init_std.empty() ? (config.action_high[j] - config.action_low[j]) / 4.0
                                  : config.init_std[j];
    }
  }

  PlanResult result;
  result.actions = mean;
  result.objective = kInvalid;
  result.imagined_reward = kInvalid;
  result.imagined_penalty = kInvalid;
  std::vector<double> samples(n * width);
  std::vector<ObjectiveValue> values(n);
  std::vector<std::size_t> order(n);
  bool found = false;

  for (int iter = 0; iter < config.iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      SplitMix64 gen(StreamSeed(config.seed, {timestep, static_cast<std::uint64_t>(iter), i}));
      std::normal_distribution<double> normal(0.0, 1.0);
      double* x = &samples[i * width];
      for (std::size_t e = 0; e < width; ++e) {
        const std::size_t j = e % action_dim;
        x[e] = std::clamp(mean[e] + stddev[e] * normal(gen), config.action_low[j],
                          config.action_high[j]);
      }
    }
    EvaluateParallel(evaluator, samples, n, steps, width, config.threads, values);

    for (std::size_t i = 0; i < n; ++i) {
      if (values[i].value > result.objective) {
        found = true;
        result.objective = values[i].value;
        result.imagined_reward = values[i].reward;
        result.imagined_penalty = values[i].penalty;
        std::copy_n(&samples[i * width], width, result.actions.data().begin());
      }
    }

    // Descending objective; equal objectives keep the lower index first.
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a].value > values[b].value;
    });
    std::size_t usable = 0;
    double elite_sum = 0.0;
    while (usable < k && values[order[usable]].value > kInvalid) {
      elite_sum += values[order[usable]].value;
      ++usable;
    }
    result.elite_trace.push_back(usable > 0 ? elite_sum / static_cast<double>(usable)
                                            : kInvalid);
    if (usable == 0) continue;
    for (std::size_t e = 0; e < width; ++e) {
      double m = 0.0;
      for (std::size_t r = 0; r < usable; ++r) m += samples[order[r] * width + e];
      m /= static_cast<double>(usable);
      double v = 0.0;
      for (std::size_t r = 0; r < usable; ++r) {
        const double d = samples[order[r] * width + e] - m;
        v += d * d;
      }
      mean[e] = m;
      stddev[e] = std::max(std::sqrt(v / static_cast<double>(usable)), config.std_floor);
    }
  }
  if (!found) {
    result.all_invalid = true;
    result.actions = warm_start ? *warm_start : DefaultWarmStart(config, action_dim);
  }
  return result;
}

// ------------------------------------------------------------------ MPC --

MpcAgent::MpcAgent(const Predictor& predictor, const Regularizer& regularizer,
                   const Environment& env, PlannerConfig config)
    : predictor_(predictor),
      regularizer_(regularizer),
      env_(env),
      config_(config.WithBounds(env.spec())) {
  config_.Validate(env.spec().action_dim);
  ResetWarmStart();
}

void MpcAgent::ResetWarmStart() {
  warm_start_ = DefaultWarmStart(config_, env_.spec().action_dim);
}

MpcStep MpcAgent::Act(std::span<const double> state, std::uint64_t timestep) {
  const std::size_t da = env_.spec().action_dim;
  TrajectoryObjective objective(predictor_, regularizer_, env_, config_.alpha, state);
  TrajectoryEvaluator evaluator(objective);
  MpcStep step;
  step.plan = CemPlan(evaluator, config_, da, warm_start_, timestep);
  const Tensor& best = step.plan.actions;
  step.action.assign(best.row(0).begin(), best.row(0).end());
  env_.ClipAction(step.action);
  if (config_.shift_warm_start) {
    Tensor shifted = DefaultWarmStart(config_, da);
    for (std::size_t t = 1; t < best.rows(); ++t) {
      std::copy_n(best.row(t).data(), da, shifted.row(t - 1).data());
    }
    warm_start_ = std::move(shifted);
  } else {
    ResetWarmStart();
  }
  return step;
}

// ------------------------------------------------------- gradient planner --

Tensor ObjectiveGradient(const DynamicsModel& model, const Regularizer& regularizer,
                         const Environment& env, double alpha,
                         std::span<const double> s0, const Tensor& actions) {
  const std::size_t ds = model.state_dim(), da = model.action_dim();
  const std::size_t dt = 2 * ds + da;
  const std::size_t steps = actions.rows();
  if (s0.size() != ds || actions.rank() != 2 || actions.cols() != da || steps == 0) {
    throw ShapeError("gradient needs a state of width " + std::to_string(ds) +
                     " and (H + 1) x " + std::to_string(da) + " actions");
  }
  const bool penalize = regularizer.kind() != RegularizerKind::kNone && alpha != 0.0;
  std::vector<double> states((steps + 1) * ds), grad_s((steps + 1) * ds, 0.0);
  std::vector<double> transition(dt), pen_grad(dt), rs(ds), ra(da), vjp_s(ds), vjp_a(da);
  Tensor grad_a(steps, da);

  // Forward pass storing the imagined states, then reverse accumulation.
  std::copy(s0.begin(), s0.end(), states.begin());
  for (std::size_t t = 0; t < steps; ++t) {
    model.PredictMeanBatch(std::span(&states[t * ds], ds), actions.row(t), 1,
                           std::span(&states[(t + 1) * ds], ds));
  }
  for (std::size_t t = steps; t-- > 0;) {
    std::span<const double> s(&states[t * ds], ds), a = actions.row(t);
    env.RewardGradient(s, a, rs, ra);
    for (std::size_t j = 0; j < ds; ++j) grad_s[t * ds + j] += rs[j];
    for (std::size_t j = 0; j < da; ++j) grad_a(t, j) += ra[j];
    if (penalize) {
      std::copy_n(s.data(), ds, transition.data());
      std::copy_n(a.data(), da, transition.data() + ds);
      std::copy_n(&states[(t + 1) * ds], ds, transition.data() + ds + da);
      regularizer.PenaltyGradientBatch(transition, 1, pen_grad);
      for (std::size_t j = 0; j < ds; ++j) {
        grad_s[t * ds + j] -= alpha * pen_grad[j];
        grad_s[(t + 1) * ds + j] -= alpha * pen_grad[ds + da + j];
      }
      for (std::size_t j = 0; j < da; ++j) grad_a(t, j) -= alpha * pen_grad[ds + j];
    }
    // s_{t+1} = f(s_t, a_t): pull its accumulated gradient back.
    model.MeanVectorJacobianProduct(s, a, 1, std::span(&grad_s[(t + 1) * ds], ds), vjp_s,
                                    vjp_a);
    for (std::size_t j = 0; j < ds; ++j) grad_s[t * ds + j] += vjp_s[j];
    for (std::size_t j = 0; j < da; ++j) grad_a(t, j) += vjp_a[j];
  }
  return grad_a;
}

PlanResult GradientPlan(const DynamicsModel& model, const Regularizer& regularizer,
                        const Environment& env, const PlannerConfig& raw_config,
                        const GradientPlanConfig& gradient_config,
                        std::span<const double> s0, const Tensor& initial) {
  const PlannerConfig config = raw_config.WithBounds(env.spec());
  const std::size_t da = model.action_dim();
  const std::size_t steps = static_cast<std::size_t>(config.horizon) + 1;
  config.Validate(da);
  if (initial.rank() != 2 || initial.rows() != steps || initial.cols() != da) {
    throw ShapeError("initial plan must be (H + 1) x action_dim");
  }
  if (gradient_config.iterations < 1 || !(gradient_config.learning_rate > 0.0)) {
    throw ConfigError("gradient planner needs iterations >= 1 and a positive rate");
  }
  TrajectoryObjective objective(model, regularizer, env, config.alpha, s0);

  Tensor actions = initial;
  for (std::size_t t = 0; t < steps; ++t) env.ClipAction(actions.row(t));

  PlanResult result;
  result.actions = actions;
  result.objective = kInvalid;
  std::vector<double> m(actions.size(), 0.0), v(actions.size(), 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  for (int iter = 0; iter <= gradient_config.iterations; ++iter) {
    ObjectiveValue value = objective.Evaluate(actions);
    result.elite_trace.push_back(value.value);
    if (value.value > result.objective) {
      result.objective = value.value;
      result.imagined_reward = value.reward;
      result.imagined_penalty = value.penalty;
      result.actions = actions;
    }
    if (iter == gradient_config.iterations || !std::isfinite(value.value)) break;

    Tensor grad = ObjectiveGradient(model, regularizer, env, config.alpha, s0, actions);
    // Adam ascent on the value.
    const double step = static_cast<double>(iter + 1);
    const double c1 = 1.0 - std::pow(b1, step), c2 = 1.0 - std::pow(b2, step);
    for (std::size_t e = 0; e < actions.size(); ++e) {
      const double g = -grad[e];
      m[e] = b1 * m[e] + (1.0 - b1) * g;
      v[e] = b2 * v[e] + (1.0 - b2) * g * g;
      actions[e] -= gradient_config.learning_rate * (m[e] / c1) / (std::sqrt(v[e] / c2) + eps);
    }
    for (std::size_t t = 0; t < steps; ++t) env.ClipAction(actions.row(t));
  }
  if (!std::isfinite(result.objective)) result.all_invalid = true;
  return result;
}

}  // namespace ebplan
