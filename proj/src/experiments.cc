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
#include <cstdio>
#include <sstream>

#include "ebplan/errors.h"
#include "ebplan/harness.h"
#include "ebplan/random.h"

namespace ebplan {
namespace {

enum Stream : std::uint64_t {
  kProbeResetStream = 11,
  kSettleStream = 12,
  kOpenLoopStream = 13,
};

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double Rmse(const std::vector<double>& a, const std::vector<double>& b, double offset) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i] - offset;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

DivergenceReport DivergenceExperiment(const ExperimentConfig& config,
                                      const DivergenceOptions& options, bool use_oracle) {
  config.Validate();
  if (options.checkpoint_episode <= config.random_episodes) {
    throw ConfigError("checkpoint_episode must exceed random_episodes");
  }
  if (options.settle_steps < 0) throw ConfigError("settle_steps must be >= 0");
  if (options.seeds < 1) throw ConfigError("seeds must be >= 1");
  if (options.horizon < 0) throw ConfigError("horizon must be >= 0");

  ExperimentConfig train = config;
  train.episodes = options.checkpoint_episode;
  train.output_dir.clear();
  RunResult run = TrainingLoop(train);
  TrainedModels models =
      RetrainModels(config, run.buffer, options.checkpoint_episode,
                    {RegularizerKind::kDeen, RegularizerKind::kDae}, &run.models);

  auto env = MakeEnvironment(config.env);
  OracleDynamics oracle(*env);
  const Predictor& predictor =
      use_oracle ? static_cast<const Predictor&>(oracle) : *models.dynamics;

  DivergenceReport report;
  report.training = std::move(run.records);
  for (int seed = 0; seed < options.seeds; ++seed) {
    const auto s = static_cast<std::uint64_t>(seed);
    EnvState state = env->Reset(StreamSeed(config.seed, {kProbeResetStream, s}));
    Regularizer settle_reg = MakeRegularizer(models, config.regularizer.kind);
    MpcAgent settler(predictor, settle_reg, *env,
                     config.MakePlannerConfig(*env, StreamSeed(config.seed, {kSettleStream, s})));
    for (int t = 0; t < options.settle_steps; ++t) {
      state = env->Step(state, settler.Act(state.x, static_cast<std::uint64_t>(t)).action);
    }

    for (RegularizerKind kind :
         {RegularizerKind::kNone, RegularizerKind::kDae, RegularizerKind::kDeen}) {
      ExperimentConfig probe = config;
      probe.regularizer.kind = kind;
      if (kind == RegularizerKind::kDeen && options.deen_alpha >= 0.0) {
        probe.regularizer.alpha = options.deen_alpha;
      }
      if (kind == RegularizerKind::kDae && options.dae_alpha >= 0.0) {
        probe.regularizer.alpha = options.dae_alpha;
      }
      if (options.horizon > 0) probe.planner.horizon = options.horizon;
      // Same stream for every regularizer: differences come from the
      // objective alone.
      PlannerConfig pc =
          probe.MakePlannerConfig(*env, StreamSeed(config.seed, {kOpenLoopStream, s}));
      Regularizer reg = MakeRegularizer(models, kind);
      TrajectoryObjective objective(predictor, reg, *env, pc.alpha, state.x);
      TrajectoryEvaluator evaluator(objective);
      PlanResult plan = CemPlan(evaluator, pc, env->spec().action_dim, std::nullopt, 0);

      double realized = 0.0;
      EnvState sim = state;
      for (std::size_t tau = 0; tau < plan.actions.rows(); ++tau) {
        std::vector<double> a(plan.actions.row(tau).begin(), plan.actions.row(tau).end());
        realized += env->Reward(sim.x, a);
        sim = env->Step(sim, a);
      }
      DivergenceRow row;
      row.seed = seed;
      row.regularizer = kind;
      row.imagined_return = plan.imagined_reward;
      row.realized_return = realized;
      row.gap = std::abs(plan.imagined_reward - realized);
      report.rows.push_back(row);
    }
  }
  return report;
}

std::string DivergenceCsv(const DivergenceReport& report) {
  std::ostringstream s;
  s << "seed,regularizer,imagined_return,realized_return,gap\n";
  for (const DivergenceRow& r : report.rows) {
    s << r.seed << ',' << RegularizerName(r.regularizer) << ',' << Num(r.imagined_return)
      << ',' << Num(r.realized_return) << ',' << Num(r.gap) << '\n';
  }
  return s.str();
}

MixtureReport MixtureExperiment(const MixtureOptions& options) {
  if (!(options.sigma > 0.0) || !std::isfinite(options.sigma)) {
    throw ConfigError("sigma must be positive");
  }
  if (options.samples < 2) throw ConfigError("samples must be >= 2");
  if (options.grid_points < 2) throw ConfigError("grid_points must be >= 2");
  options.mixture.Validate();

  std::mt19937_64 rng(options.seed);
  std::vector<double> xs = options.mixture.Sample(options.samples, rng);
  Tensor data({xs.size(), 1}, xs);

  DensityTrainConfig c;
  c.noise = {options.sigma, Mix64(options.seed)};
  c.epochs = options.epochs;
  c.batch_size = options.batch_size;
  c.learning_rate = options.learning_rate;
  c.hidden_sizes = options.hidden_sizes;
  c.normalize = false;
  EnergyModel deen = TrainDeen(data, c).model;
  DenoiserModel dae = TrainDae(data, c).model;

  double lo = GmmQuantile(options.mixture, options.sigma, 0.005);
  double hi = GmmQuantile(options.mixture, options.sigma, 0.995);
  MixtureReport report;
  std::vector<double> analytic_e, analytic_s, deen_e, deen_s, dae_s;
  for (std::size_t i = 0; i < options.grid_points; ++i) {
    double y = lo + (hi - lo) * static_cast<double>(i) /
                        static_cast<double>(options.grid_points - 1);
    GmmOracleValue truth = GmmOracle(options.mixture, options.sigma, y);
    std::vector<double> v = {y};
    MixtureGridRow row{y, truth.neg_log_density, truth.score,
                       deen.Energy(v), deen.Score(v)[0], dae.Score(v)[0]};
    analytic_e.push_back(row.analytic_energy);
    analytic_s.push_back(row.analytic_score);
    deen_e.push_back(row.deen_energy);
    deen_s.push_back(row.deen_score);
    dae_s.push_back(row.dae_score);
    report.grid.push_back(row);
  }
  double offset = 0.0;
  for (std::size_t i = 0; i < deen_e.size(); ++i) offset += deen_e[i] - analytic_e[i];
  offset /= static_cast<double>(deen_e.size());
  report.deen_energy_rmse = Rmse(deen_e, analytic_e, offset);
  report.deen_score_rmse = Rmse(deen_s, analytic_s, 0.0);
  report.dae_score_rmse = Rmse(dae_s, analytic_s, 0.0);
  return report;
}

std::string MixtureCsv(const MixtureReport& report) {
  std::ostringstream s;
  s << "y,analytic_energy,analytic_score,deen_energy,deen_score,dae_score\n";
  for (const MixtureGridRow& r : report.grid) {
    s << Num(r.y) << ',' << Num(r.analytic_energy) << ',' << Num(r.analytic_score) << ','
      << Num(r.deen_energy) << ',' << Num(r.deen_score) << ',' << Num(r.dae_score) << '\n';
  }
  return s.str();
}

}  // namespace ebplan
