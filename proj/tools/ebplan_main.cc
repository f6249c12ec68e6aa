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

// Command-line entry point: train, fig3, divergence, eval.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ebplan/errors.h"
#include "ebplan/harness.h"
#include "ebplan/random.h"

namespace ebplan {
namespace {

void WriteOrPrint(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ContractError("cannot write '" + path + "'");
  out << text;
}

ExperimentConfig ConfigFrom(const std::string& path, const std::string& preset) {
  if (!path.empty()) return LoadConfig(path);
  return PresetConfig(preset);
}

int Train(const std::string& config_path, const std::string& preset,
          std::optional<std::uint64_t> seed, const std::string& out, bool wall_clock) {
  ExperimentConfig c = ConfigFrom(config_path, preset);
  if (seed) c.seed = *seed;
  if (!out.empty()) c.output_dir = out;
  if (wall_clock) c.record_wall_clock = true;
  RunResult run = TrainingLoop(c);
  for (const EpisodeRecord& r : run.records) {
    std::printf("episode %d %s return %.3f\n", r.episode, r.planned ? "mpc   " : "random",
                r.episode_return);
  }
  return 0;
}

int Mixture(double sigma, std::size_t samples, std::uint64_t seed, const std::string& out) {
  MixtureOptions o;
  o.sigma = sigma;
  o.samples = samples;
  o.seed = seed;
  MixtureReport r = MixtureExperiment(o);
  WriteOrPrint(out, MixtureCsv(r));
  std::fprintf(stderr, "deen score rmse %.4f  dae score rmse %.4f  deen energy rmse %.4f\n",
               r.deen_score_rmse, r.dae_score_rmse, r.deen_energy_rmse);
  return 0;
}

int Divergence(const std::string& config_path, const std::string& preset,
               std::optional<std::uint64_t> seed, const DivergenceOptions& o, bool oracle,
               const std::string& out) {
  ExperimentConfig c = ConfigFrom(config_path, preset);
  if (seed) c.seed = *seed;
  DivergenceReport r = DivergenceExperiment(c, o, oracle);
  WriteOrPrint(out, DivergenceCsv(r));
  return 0;
}

int Eval(const std::string& model_path, const std::string& regularizer_path,
         const std::string& env_name, int episodes, const std::string& config_path,
         std::uint64_t seed) {
  ExperimentConfig c = ConfigFrom(config_path, env_name);
  if (c.env != env_name) throw ConfigError("--env disagrees with the config's env");
  auto env = MakeEnvironment(env_name);
  DynamicsModel model = ParseDynamicsModel(ReadFile(model_path));
  if (model.state_dim() != env->spec().state_dim ||
      model.action_dim() != env->spec().action_dim) {
    throw ShapeError("model does not match environment '" + env_name + "'");
  }
  Regularizer reg;
  if (!regularizer_path.empty()) {
    std::string text = ReadFile(regularizer_path);
    if (ModelFileKind(text) == "energy") {
      reg = Regularizer(std::make_shared<EnergyModel>(ParseEnergyModel(text)));
      c.regularizer.kind = RegularizerKind::kDeen;
    } else {
      reg = Regularizer(std::make_shared<DenoiserModel>(ParseDenoiserModel(text)));
      c.regularizer.kind = RegularizerKind::kDae;
    }
  } else {
    c.regularizer.kind = RegularizerKind::kNone;
  }
  double total = 0.0;
  for (int k = 0; k < episodes; ++k) {
    const auto ks = static_cast<std::uint64_t>(k);
    MpcAgent agent(model, reg, *env, c.MakePlannerConfig(*env, StreamSeed(seed, {1, ks})));
    MpcPolicy policy(agent);
    EpisodeRecord r = RunEpisode(*env, policy, StreamSeed(seed, {2, ks}),
                                 c.EpisodeLength(*env), k, nullptr);
    std::printf("episode %d return %.3f\n", k, r.episode_return);
    total += r.episode_return;
  }
  std::printf("mean return %.3f\n", total / episodes);
  return 0;
}

}  // namespace
}  // namespace ebplan

int main(int argc, char** argv) {
  using ebplan::DivergenceOptions;
  CLI::App app{"Energy-regularized model-based planning"};
  app.require_subcommand(1);

  std::string config_path, preset = "pendulum", out;
  std::optional<std::uint64_t> seed;
  bool wall_clock = false;
  auto* train = app.add_subcommand("train", "Run the training loop");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--preset", preset, "Preset used when no config is given");
  train->add_option("--seed", seed, "Override the config seed");
  train->add_option("--out", out, "Output directory");
  train->add_flag("--wall-clock", wall_clock, "Record per-episode wall-clock time");

  double sigma = 0.5;
  std::size_t samples = 1000;
  std::uint64_t fig_seed = 0;
  std::string fig_out;
  auto* fig3 = app.add_subcommand("fig3", "Score and energy of DEEN and DAE on a 1-D mixture");
  fig3->add_option("--sigma", sigma, "Noise scale");
  fig3->add_option("--samples", samples, "Training samples");
  fig3->add_option("--seed", fig_seed, "Seed");
  fig3->add_option("--out", fig_out, "CSV path (default stdout)");

  DivergenceOptions dopt;
  bool oracle = false;
  std::string div_config, div_preset = "pendulum", div_out;
  auto* div = app.add_subcommand("divergence", "Imagined versus realized return per regularizer");
  div->add_option("--config", div_config, "JSON config file");
  div->add_option("--preset", div_preset, "Preset used when no config is given");
  div->add_option("--episodes", dopt.checkpoint_episode, "Training episodes before the probe");
  div->add_option("--settle", dopt.settle_steps, "MPC steps before the open-loop plan");
  div->add_option("--seeds", dopt.seeds, "Probe seeds");
  div->add_option("--horizon", dopt.horizon, "Open-loop horizon (default: planner horizon)");
  div->add_option("--deen-alpha", dopt.deen_alpha, "Cost multiplier for DEEN");
  div->add_option("--dae-alpha", dopt.dae_alpha, "Cost multiplier for DAE");
  std::optional<std::uint64_t> div_seed;
  div->add_option("--seed", div_seed, "Override the config seed");
  div->add_flag("--oracle", oracle, "Plan with the exact dynamics");
  div->add_option("--out", div_out, "CSV path (default stdout)");

  std::string model_path, reg_path, env_name = "pendulum", eval_config;
  int episodes = 1;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Run MPC episodes with a saved dynamics model");
  eval->add_option("--model", model_path, "Dynamics model file")->required();
  eval->add_option("--regularizer", reg_path, "Energy or denoiser model file");
  eval->add_option("--env", env_name, "Environment");
  eval->add_option("--episodes", episodes, "Episodes")->check(CLI::PositiveNumber);
  eval->add_option("--config", eval_config, "Planner settings (default: env preset)");
  eval->add_option("--seed", eval_seed, "Seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return ebplan::Train(config_path, preset, seed, out, wall_clock);
    if (*fig3) return ebplan::Mixture(sigma, samples, fig_seed, fig_out);
    if (*div) return ebplan::Divergence(div_config, div_preset, div_seed, dopt, oracle, div_out);
    if (*eval) {
      return ebplan::Eval(model_path, reg_path, env_name, episodes, eval_config, eval_seed);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
