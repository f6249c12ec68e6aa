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

#ifndef EBPLAN_PLANNER_H_
#define EBPLAN_PLANNER_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ebplan/density.h"
#include "ebplan/dynamics.h"
#include "ebplan/envs.h"
#include "ebplan/predictor.h"
#include "ebplan/tensor.h"

namespace ebplan {

enum class RegularizerKind { kNone, kDeen, kDae };

std::string_view RegularizerName(RegularizerKind kind);
RegularizerKind ParseRegularizer(std::string_view name);

// Penalty on imagined transitions (s, a, s'): the DEEN energy or the DAE
// reconstruction error, or nothing.
class Regularizer {
 public:
  Regularizer() = default;  // kNone
  explicit Regularizer(std::shared_ptr<const EnergyModel> energy);
  explicit Regularizer(std::shared_ptr<const DenoiserModel> denoiser);

  RegularizerKind kind() const { return kind_; }
  const EnergyModel* energy() const { return energy_.get(); }
  const DenoiserModel* denoiser() const { return denoiser_.get(); }
  // Width of the transition vector, 0 for kNone.
  std::size_t dim() const;

  // `in` is rows x dim transition vectors; writes one penalty per row
  // (zeros for kNone).
  void PenaltyBatch(std::span<const double> in, std::size_t rows,
                    std::span<double> out) const;
  // d penalty / d transition vector, rows x dim.
  void PenaltyGradientBatch(std::span<const double> in, std::size_t rows,
                            std::span<double> grad) const;

 private:
  RegularizerKind kind_ = RegularizerKind::kNone;
  std::shared_ptr<const EnergyModel> energy_;
  std::shared_ptr<const DenoiserModel> denoiser_;
};

struct ObjectiveValue {
  double value = 0.0;    // reward - alpha * penalty, -inf if the rollout failed
  double reward = 0.0;   // sum of imagined rewards
  double penalty = 0.0;  // sum of unweighted penalties
};

// sum_{tau=0..H} r(s~_tau, a_tau) - alpha * penalty(s~_tau, a_tau, s~_{tau+1})
// with s~_0 = s0 and s~_{tau+1} the predictor's mean. Pure.
class TrajectoryObjective {
 public:
  TrajectoryObjective(const Predictor& predictor, const Regularizer& regularizer,
                      const Environment& env, double alpha,
                      std::span<const double> s0);

  std::size_t action_dim() const { return predictor_.action_dim(); }

  // `candidates` holds `count` sequences of (H + 1) x action_dim actions
  // back to back. Results depend only on each candidate's own actions.
  void EvaluateBatch(std::span<const double> candidates, std::size_t count,
                     std::size_t steps, std::span<ObjectiveValue> out) const;
  ObjectiveValue Evaluate(const Tensor& actions) const;

 private:
  const Predictor& predictor_;
  const Regularizer& regularizer_;
  const Environment& env_;
  double alpha_;
  std::vector<double> s0_;
};

struct PlannerConfig {
  int horizon = 15;  // H; sequences have H + 1 actions
  double alpha = 0.0;
  RegularizerKind regularizer = RegularizerKind::kNone;
  int population = 400;
  int elites = 40;
  int iterations = 5;
  std::vector<double> init_std;  // empty: (high - low) / 4 per dimension
  double std_floor = 1e-3;
  std::vector<double> action_low;
  std::vector<double> action_high;
  bool shift_warm_start = true;
  std::uint64_t seed = 0;
  int threads = 1;

  // Throws ConfigError on an invalid combination (e.g. elites > population).
  void Validate(std::size_t action_dim) const;
  // Copy with empty bounds taken from the environment.
  PlannerConfig WithBounds(const EnvSpec& spec) const;
};

struct PlanResult {
  Tensor actions;  // (H + 1) x action_dim, best candidate ever evaluated
  double objective = 0.0;
  std::vector<double> elite_trace;  // mean elite objective per iteration
  double imagined_reward = 0.0;
  double imagined_penalty = 0.0;
  bool all_invalid = false;  // every candidate failed; actions = warm start
};

// Sequences of (H + 1) x action_dim actions scored in batches.
class CandidateEvaluator {
 public:
  virtual ~CandidateEvaluator() = default;
  virtual void EvaluateBatch(std::span<const double> candidates, std::size_t count,
                             std::size_t steps, std::span<ObjectiveValue> out) const = 0;
};

// Adapts a TrajectoryObjective to CandidateEvaluator.
class TrajectoryEvaluator final : public CandidateEvaluator {
 public:
  explicit TrajectoryEvaluator(const TrajectoryObjective& objective) : objective_(objective) {}
  void EvaluateBatch(std::span<const double> candidates, std::size_t count,
                     std::size_t steps, std::span<ObjectiveValue> out) const override {
    objective_.EvaluateBatch(candidates, count, steps, out);
  }

 private:
  const TrajectoryObjective& objective_;
};

// Cross-entropy method. Candidate i of iteration k draws from its own stream
// seeded by (seed, timestep, k, i), so results do not depend on evaluation
// order or thread count. `warm_start` defaults to the middle of the bounds.
PlanResult CemPlan(const CandidateEvaluator& evaluator, const PlannerConfig& config,
                   std::size_t action_dim, const std::optional<Tensor>& warm_start,
                   std::uint64_t timestep);

// (H + 1) x action_dim sequence at the middle of the bounds.
Tensor DefaultWarmStart(const PlannerConfig& config, std::size_t action_dim);

struct MpcStep {
  std::vector<double> action;
  PlanResult plan;
};

// Receding-horizon controller: plan, apply the first action, shift the plan
// into the next warm start. Holds references; the predictor, regularizer and
// environment must outlive it.
class MpcAgent {
 public:
  MpcAgent(const Predictor& predictor, const Regularizer& regularizer,
           const Environment& env, PlannerConfig config);

  MpcStep Act(std::span<const double> state, std::uint64_t timestep);
  const Tensor& warm_start() const { return warm_start_; }
  void ResetWarmStart();
  const PlannerConfig& config() const { return config_; }

 private:
  const Predictor& predictor_;
  const Regularizer& regularizer_;
  const Environment& env_;
  PlannerConfig config_;
  Tensor warm_start_;
};

// d objective / d actions through the learned model's mean rollout. The DAE
// penalty gradient holds the denoiser output fixed.
Tensor ObjectiveGradient(const DynamicsModel& model, const Regularizer& regularizer,
                         const Environment& env, double alpha,
                         std::span<const double> s0, const Tensor& actions);

struct GradientPlanConfig {
  int iterations = 100;
  double learning_rate = 0.05;
};

// Adam on the action sequence through the differentiable rollout of a learned
// model, starting from `initial`. Actions are clipped to the bounds after
// each step; the best sequence seen is returned.
PlanResult GradientPlan(const DynamicsModel& model, const Regularizer& regularizer,
                        const Environment& env, const PlannerConfig& config,
                        const GradientPlanConfig& gradient_config,
                        std::span<const double> s0, const Tensor& initial);

}  // namespace ebplan

#endif  // EBPLAN_PLANNER_H_
