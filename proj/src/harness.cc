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

#include "ebplan/harness.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "ebplan/errors.h"
#include "ebplan/random.h"
#include "json.hpp"

namespace ebplan {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream identifiers for StreamSeed(config.seed, {stream, index}).
enum Stream : std::uint64_t {
  kResetStream = 1,
  kRandomPolicyStream = 2,
  kPlanStream = 3,
  kDynamicsStream = 4,
  kDensityStream = 5,
};

double LastOrNaN(const std::vector<double>& v) { return v.empty() ? kNaN : v.back(); }

double Mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void AppendLine(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw ContractError("cannot write '" + path.string() + "'");
  out << line << '\n';
  out.flush();
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ContractError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

// --------------------------------------------------------------- buffer --

void ReplayBuffer::Append(Transition t) {
  if (!items_.empty()) {
    const Transition& f = items_.front();
    if (t.s.size() != f.s.size() || t.a.size() != f.a.size() ||
        t.s_next.size() != f.s_next.size()) {
      throw ShapeError("transition widths differ from the buffer's");
    }
  }
  items_.push_back(std::move(t));
}

TransitionBatch ReplayBuffer::ToBatch() const {
  if (items_.empty()) throw ContractError("replay buffer is empty");
  std::size_t n = items_.size();
  std::size_t ds = items_[0].s.size();
  std::size_t da = items_[0].a.size();
  TransitionBatch b{Tensor(n, ds), Tensor(n, da), Tensor(n, ds)};
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(items_[i].s.begin(), items_[i].s.end(), b.states.row(i).begin());
    std::copy(items_[i].a.begin(), items_[i].a.end(), b.actions.row(i).begin());
    std::copy(items_[i].s_next.begin(), items_[i].s_next.end(), b.next_states.row(i).begin());
  }
  return b;
}

Tensor ReplayBuffer::TransitionVectors() const {
  if (items_.empty()) throw ContractError("replay buffer is empty");
  std::size_t ds = items_[0].s.size();
  std::size_t da = items_[0].a.size();
  Tensor v(items_.size(), 2 * ds + da);
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto row = v.row(i);
    auto it = std::copy(items_[i].s.begin(), items_[i].s.end(), row.begin());
    it = std::copy(items_[i].a.begin(), items_[i].a.end(), it);
    std::copy(items_[i].s_next.begin(), items_[i].s_next.end(), it);
  }
  return v;
}

double ReplayBuffer::EpisodeReturn(int episode) const {
  double total = 0.0;
  for (const Transition& t : items_) {
    if (t.episode == episode) total += t.reward;
  }
  return total;
}

// ------------------------------------------------------------- episodes --

RandomPolicy::RandomPolicy(const Environment& env, std::uint64_t seed)
    : env_(env), rng_(seed) {}

Policy::Decision RandomPolicy::Act(const EnvState&) {
  const EnvSpec& spec = env_.spec();
  Decision d{std::vector<double>(spec.action_dim), kNaN};
  for (std::size_t j = 0; j < spec.action_dim; ++j) {
    std::uniform_real_distribution<double> u(spec.action_low[j], spec.action_high[j]);
    d.action[j] = u(rng_);
  }
  return d;
}

Policy::Decision MpcPolicy::Act(const EnvState& state) {
  MpcStep step = agent_.Act(state.x, static_cast<std::uint64_t>(state.step));
  double per_step = step.plan.imagined_reward / static_cast<double>(step.plan.actions.rows());
  return {std::move(step.action), per_step};
}

EpisodeRecord RunEpisode(const Environment& env, Policy& policy, std::uint64_t reset_seed,
                         int length, int episode_index, ReplayBuffer* buffer) {
  if (length < 1) throw ConfigError("episode length must be >= 1");
  EpisodeRecord rec;
  rec.episode = episode_index;
  EnvState state = env.Reset(reset_seed);
  for (int t = 0; t < length; ++t) {
    Policy::Decision d = policy.Act(state);
    std::vector<double> a = d.action;
    env.ClipAction(a);
    EnvState next;
    try {
      next = env.Step(state, a);
    } catch (const NumericError&) {
      rec.aborted = true;
      break;
    }
    double r = env.Reward(state.x, a);
    rec.realized_rewards.push_back(r);
    rec.imagined_rewards.push_back(d.imagined_reward);
    rec.episode_return += r;
    if (buffer != nullptr) {
      buffer->Append({state.x, a, next.x, r, episode_index, t});
    }
    state = std::move(next);
  }
  rec.mean_realized_reward = Mean(rec.realized_rewards);
  rec.mean_imagined_reward = Mean(rec.imagined_rewards);
  rec.buffer_size = buffer != nullptr ? buffer->size() : 0;
  return rec;
}

// ------------------------------------------------------- training loop --

TrainedModels RetrainModels(const ExperimentConfig& config, const ReplayBuffer& buffer,
                            int episode, const std::vector<RegularizerKind>& kinds,
                            const TrainedModels* previous) {
  TrainedModels out;
  const bool warm = config.warm_start_models && previous != nullptr;
  DynamicsTrainConfig dc;
  dc.hidden_sizes = config.dynamics.HiddenSizes();
  dc.epochs = ScheduledEpochs(config.dynamics.epochs, episode, config.dynamics.schedule);
  dc.batch_size = config.dynamics.batch_size;
  dc.learning_rate = config.dynamics.learning_rate;
  dc.seed = StreamSeed(config.seed, {kDynamicsStream, static_cast<std::uint64_t>(episode)});
  if (warm && previous->dynamics) dc.warm_start = previous->dynamics->params();
  try {
    TrainedDynamics td = TrainDynamics(buffer.ToBatch(), dc);
    out.dynamics = std::make_shared<DynamicsModel>(std::move(td.model));
    out.dynamics_report = std::move(td.report);
  } catch (const NumericError& e) {
    throw NumericError("episode " + std::to_string(episode) +
                       ": dynamics model training diverged: " + e.what());
  }

  const RegularizerSection& rs = config.regularizer;
  Tensor vectors;
  for (RegularizerKind kind : kinds) {
    if (kind == RegularizerKind::kNone) continue;
    if (vectors.empty()) vectors = buffer.TransitionVectors();
    DensityTrainConfig c;
    c.noise.sigma = rs.noise_sigma;
    c.noise.seed = StreamSeed(config.seed, {kDensityStream, static_cast<std::uint64_t>(episode),
                                            static_cast<std::uint64_t>(kind)});
    c.epochs = ScheduledEpochs(rs.model.epochs, episode, rs.model.schedule);
    c.batch_size = rs.model.batch_size;
    c.learning_rate = rs.model.learning_rate;
    c.hidden_sizes = rs.model.HiddenSizes();
    std::string name(RegularizerName(kind));
    try {
      if (kind == RegularizerKind::kDeen) {
        if (warm && previous->energy) c.warm_start = previous->energy->params();
        TrainedEnergy te = TrainDeen(vectors, c);
        out.energy = std::make_shared<EnergyModel>(std::move(te.model));
        out.regularizer_report = std::move(te.report);
      } else {
        if (warm && previous->denoiser) c.warm_start = previous->denoiser->params();
        TrainedDenoiser td = TrainDae(vectors, c);
        out.denoiser = std::make_shared<DenoiserModel>(std::move(td.model));
        out.regularizer_report = std::move(td.report);
      }
    } catch (const NumericError& e) {
      throw NumericError("episode " + std::to_string(episode) + ": " + name +
                         " model training diverged: " + e.what());
    }
  }
  return out;
}

Regularizer MakeRegularizer(const TrainedModels& models, RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::kDeen:
      return Regularizer(models.energy);
    case RegularizerKind::kDae:
      return Regularizer(models.denoiser);
    case RegularizerKind::kNone:
      break;
  }
  return Regularizer();
}

std::string MetricsHeader() {
  return "episode,return,buffer_size,dyn_train_nll,dyn_holdout_nll,reg_train_loss,"
         "mean_imagined_reward,mean_realized_reward,wall_clock_s";
}

std::string MetricsRow(const EpisodeRecord& r) {
  std::ostringstream s;
  s << r.episode << ',' << Num(r.episode_return) << ',' << r.buffer_size << ','
    << Num(r.dyn_train_nll) << ',' << Num(r.dyn_holdout_nll) << ',' << Num(r.reg_train_loss)
    << ',' << Num(r.mean_imagined_reward) << ',' << Num(r.mean_realized_reward) << ','
    << Num(r.wall_clock_s);
  return s.str();
}

RunResult TrainingLoop(const ExperimentConfig& config) {
  config.Validate();
  auto env = MakeEnvironment(config.env);
  const int length = config.EpisodeLength(*env);
  std::filesystem::path dir;
  if (!config.output_dir.empty()) {
    dir = config.output_dir;
    std::filesystem::create_directories(dir);
    WriteText(dir / "config.json", ConfigToJson(config));
    WriteText(dir / "metrics.csv", MetricsHeader() + "\n");
  }

  RunResult run;
  for (int ep = 0; ep < config.episodes; ++ep) {
    auto start = std::chrono::steady_clock::now();
    const auto index = static_cast<std::uint64_t>(ep);
    const std::uint64_t reset_seed = StreamSeed(config.seed, {kResetStream, index});
    EpisodeRecord rec;
    if (ep < config.random_episodes) {
      RandomPolicy policy(*env, StreamSeed(config.seed, {kRandomPolicyStream, index}));
      rec = RunEpisode(*env, policy, reset_seed, length, ep, &run.buffer);
      rec.dyn_train_nll = rec.dyn_holdout_nll = rec.reg_train_loss = kNaN;
    } else {
      const TrainedModels* previous = run.models.dynamics ? &run.models : nullptr;
      run.models = RetrainModels(config, run.buffer, ep, {config.regularizer.kind}, previous);
      Regularizer reg = MakeRegularizer(run.models, config.regularizer.kind);
      MpcAgent agent(*run.models.dynamics, reg, *env,
                     config.MakePlannerConfig(*env, StreamSeed(config.seed, {kPlanStream, index})));
      MpcPolicy policy(agent);
      rec = RunEpisode(*env, policy, reset_seed, length, ep, &run.buffer);
      rec.planned = true;
      rec.dyn_train_nll = LastOrNaN(run.models.dynamics_report.train_nll);
      rec.dyn_holdout_nll = LastOrNaN(run.models.dynamics_report.holdout_nll);
      rec.reg_train_loss = config.regularizer.kind == RegularizerKind::kNone
                               ? kNaN
                               : LastOrNaN(run.models.regularizer_report.train_loss);
    }
    if (config.record_wall_clock) {
      rec.wall_clock_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (!dir.empty()) AppendLine(dir / "metrics.csv", MetricsRow(rec));
    run.records.push_back(std::move(rec));
  }

  if (!dir.empty()) {
    nlohmann::json summary;
    summary["env"] = config.env;
    summary["seed"] = config.seed;
    summary["regularizer"] = RegularizerName(config.regularizer.kind);
    nlohmann::json returns = nlohmann::json::array();
    for (const EpisodeRecord& r : run.records) returns.push_back(r.episode_return);
    summary["returns"] = returns;
    summary["final_return"] = run.records.back().episode_return;
    WriteText(dir / "summary.json", summary.dump(2) + "\n");
    if (run.models.dynamics) SaveModel((dir / "dynamics.model").string(), *run.models.dynamics);
    if (run.models.energy) SaveModel((dir / "energy.model").string(), *run.models.energy);
    if (run.models.denoiser) SaveModel((dir / "denoiser.model").string(), *run.models.denoiser);
  }
  return run;
}

}  // namespace ebplan
