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

#ifndef EBPLAN_HARNESS_H_
#define EBPLAN_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ebplan/density.h"
#include "ebplan/dynamics.h"
#include "ebplan/envs.h"
#include "ebplan/planner.h"

namespace ebplan {

// ----------------------------------------------------------- schedules --

struct EpochSchedule {
  enum class Kind { kConstant, kFloorAfter, kMultiplicative };
  Kind kind = Kind::kConstant;
  int after_episode = 10;  // kFloorAfter: switch once episode > after_episode
  int floor_epochs = 8;    // kFloorAfter
  double factor = 1.0;     // kMultiplicative, in (0, 1]

  void Validate() const;
  friend bool operator==(const EpochSchedule&, const EpochSchedule&) = default;
};

// Training epochs for the retraining that precedes episode `episode`.
// kMultiplicative gives max(1, round(base * factor^episode)).
int ScheduledEpochs(int base_epochs, int episode, const EpochSchedule& schedule);

// --------------------------------------------------------------- config --

// Rows of the per-task hyperparameter table: network shape, epochs, batch.
struct ModelSection {
  int hidden_layers = 2;
  int hidden_size = 64;
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  EpochSchedule schedule;

  std::vector<std::size_t> HiddenSizes() const;
  friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct RegularizerSection {
  RegularizerKind kind = RegularizerKind::kDeen;
  ModelSection model;
  double noise_sigma = 0.1;  // normalized units
  double alpha = 0.0;        // cost multiplier

  friend bool operator==(const RegularizerSection&, const RegularizerSection&) = default;
};

struct PlannerSection {
  int horizon = 15;
  int population = 400;
  int elites = 40;
  int cem_iterations = 5;
  double std_floor = 1e-3;
  std::vector<double> init_std;  // empty: a quarter of the action range
  bool shift_warm_start = true;
  int threads = 1;

  friend bool operator==(const PlannerSection&, const PlannerSection&) = default;
};

struct ExperimentConfig {
  std::string env = "pendulum";
  int episodes = 10;         // total, including random ones
  int random_episodes = 1;
  int episode_length = 0;    // 0: the environment's default
  ModelSection dynamics;
  RegularizerSection regularizer;
  PlannerSection planner;
  bool warm_start_models = true;  // continue from the previous weights
  bool record_wall_clock = false;  // off keeps metrics byte-reproducible
  std::uint64_t seed = 0;
  std::string output_dir;

  // Throws ConfigError naming the first offending key.
  void Validate() const;
  int EpisodeLength(const Environment& env) const;
  PlannerConfig MakePlannerConfig(const Environment& env, std::uint64_t seed) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Desk-scale defaults: "pendulum", "cartpole", "point_mass".
ExperimentConfig PresetConfig(const std::string& env);

// JSON text. Parsing starts from the preset of the named environment, so a
// file only lists what it overrides; unknown keys raise ConfigError.
std::string ConfigToJson(const ExperimentConfig& config);
ExperimentConfig ConfigFromJson(const std::string& text);
ExperimentConfig LoadConfig(const std::string& path);

// --------------------------------------------------------------- buffer --

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
  double reward = 0.0;
  int episode = 0;
  int step = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

// Append-only; every retraining consumes the whole buffer.
class ReplayBuffer {
 public:
  void Append(Transition t);
  std::size_t size() const { return items_.size(); }
  const std::vector<Transition>& items() const { return items_; }

  TransitionBatch ToBatch() const;
  // Rows (s, a, s') for the density models.
  Tensor TransitionVectors() const;
  double EpisodeReturn(int episode) const;

 private:
  std::vector<Transition> items_;
};

// ------------------------------------------------------------- episodes --

struct EpisodeRecord {
  int episode = 0;
  bool planned = false;
  double episode_return = 0.0;
  std::size_t buffer_size = 0;
  double dyn_train_nll = 0.0;    // NaN when nothing was trained
  double dyn_holdout_nll = 0.0;  // NaN when nothing was trained
  double reg_train_loss = 0.0;   // NaN when nothing was trained
  std::vector<double> imagined_rewards;  // plan's mean imagined reward per step
  std::vector<double> realized_rewards;
  double mean_imagined_reward = 0.0;     // NaN for random episodes
  double mean_realized_reward = 0.0;
  double wall_clock_s = 0.0;
  bool aborted = false;  // environment failure cut the episode short
};

class Policy {
 public:
  virtual ~Policy() = default;
  struct Decision {
    std::vector<double> action;
    double imagined_reward;  // NaN if the policy does not imagine
  };
  virtual Decision Act(const EnvState& state) = 0;
};

// Uniform over the action bounds.
class RandomPolicy final : public Policy {
 public:
  RandomPolicy(const Environment& env, std::uint64_t seed);
  Decision Act(const EnvState& state) override;

 private:
  const Environment& env_;
  std::mt19937_64 rng_;
};

class MpcPolicy final : public Policy {
 public:
  explicit MpcPolicy(MpcAgent& agent) : agent_(agent) {}
  Decision Act(const EnvState& state) override;

 private:
  MpcAgent& agent_;
};

// Runs `length` steps from Reset(reset_seed), appending every transition to
// `buffer` when given.
EpisodeRecord RunEpisode(const Environment& env, Policy& policy, std::uint64_t reset_seed,
                         int length, int episode_index, ReplayBuffer* buffer);

// ------------------------------------------------------- training loop --

struct TrainedModels {
  std::shared_ptr<const DynamicsModel> dynamics;
  std::shared_ptr<const EnergyModel> energy;
  std::shared_ptr<const DenoiserModel> denoiser;
  DynamicsReport dynamics_report;
  TrainingReport regularizer_report;
};

// Retrains on the whole buffer: dynamics always, and each density model whose
// kind is listed. `previous` supplies warm-start weights.
TrainedModels RetrainModels(const ExperimentConfig& config, const ReplayBuffer& buffer,
                            int episode, const std::vector<RegularizerKind>& kinds,
                            const TrainedModels* previous);

// The regularizer of `kind` backed by `models` (kNone needs nothing).
Regularizer MakeRegularizer(const TrainedModels& models, RegularizerKind kind);

struct RunResult {
  std::vector<EpisodeRecord> records;
  ReplayBuffer buffer;
  TrainedModels models;  // the last trained models (empty if none)
};

// Random episodes, then [retrain -> MPC episode] repeated. With an output
// directory set, metrics.csv gains a row after every episode and
// summary.json, config.json and the last models are written at the end.
RunResult TrainingLoop(const ExperimentConfig& config);

// CSV header and row formatting used for metrics.csv.
std::string MetricsHeader();
std::string MetricsRow(const EpisodeRecord& r);

// ------------------------------------------------------- serialization --

// Text container with hexadecimal floats, so a save/load round trip is bit
// exact. See README for the layout.
void SaveModel(const std::string& path, const DynamicsModel& model);
void SaveModel(const std::string& path, const EnergyModel& model);
void SaveModel(const std::string& path, const DenoiserModel& model);
std::string SerializeModel(const DynamicsModel& model);
std::string SerializeModel(const EnergyModel& model);
std::string SerializeModel(const DenoiserModel& model);
DynamicsModel ParseDynamicsModel(const std::string& text);
EnergyModel ParseEnergyModel(const std::string& text);
DenoiserModel ParseDenoiserModel(const std::string& text);
// "dynamics", "energy" or "denoiser"; ContractError if not a model file.
std::string ModelFileKind(const std::string& text);
std::string ReadFile(const std::string& path);

// ----------------------------------------------------------- experiments --

struct DivergenceOptions {
  int checkpoint_episode = 5;  // episodes of training before the probe
  int settle_steps = 50;
  int seeds = 5;
  int horizon = 0;        // 0: the planner horizon
  double deen_alpha = -1.0;  // < 0: regularizer.alpha
  double dae_alpha = -1.0;   // < 0: regularizer.alpha
};

struct DivergenceRow {
  int seed = 0;
  RegularizerKind regularizer = RegularizerKind::kNone;
  double imagined_return = 0.0;
  double realized_return = 0.0;
  double gap = 0.0;
};

struct DivergenceReport {
  std::vector<DivergenceRow> rows;  // 3 regularizers per seed
  std::vector<EpisodeRecord> training;
};

// Trains for checkpoint_episode episodes (or uses `oracle` dynamics when
// requested), settles with MPC, then runs open-loop CEM from a fresh
// population under each regularizer and executes the plan for real.
DivergenceReport DivergenceExperiment(const ExperimentConfig& config,
                                      const DivergenceOptions& options,
                                      bool use_oracle = false);
std::string DivergenceCsv(const DivergenceReport& report);

struct MixtureOptions {
  GaussianMixture1D mixture{{0.5, 0.5}, {-2.0, 2.0}, {0.5, 0.5}};
  std::size_t samples = 1000;
  double sigma = 0.5;
  std::uint64_t seed = 0;
  int epochs = 300;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::vector<std::size_t> hidden_sizes = {64, 64};
  std::size_t grid_points = 201;
};

struct MixtureGridRow {
  double y;
  double analytic_energy;
  double analytic_score;
  double deen_energy;
  double deen_score;
  double dae_score;
};

struct MixtureReport {
  std::vector<MixtureGridRow> grid;  // covers the 99% mass interval
  double deen_score_rmse = 0.0;
  double dae_score_rmse = 0.0;
  double deen_energy_rmse = 0.0;  // after removing the mean offset
};

// Trains DEEN and DAE on raw (unnormalized) mixture samples so sigma is in
// data units, then tabulates them against the exact corrupted mixture.
MixtureReport MixtureExperiment(const MixtureOptions& options);
std::string MixtureCsv(const MixtureReport& report);

}  // namespace ebplan

#endif  // EBPLAN_HARNESS_H_
