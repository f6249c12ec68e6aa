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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "ebplan/errors.h"
#include "ebplan/harness.h"
#include "json.hpp"

namespace ebplan {
namespace {

using nlohmann::json;

std::string_view ScheduleName(EpochSchedule::Kind kind) {
  switch (kind) {
    case EpochSchedule::Kind::kFloorAfter:
      return "floor";
    case EpochSchedule::Kind::kMultiplicative:
      return "multiplicative";
    case EpochSchedule::Kind::kConstant:
      break;
  }
  return "constant";
}

EpochSchedule::Kind ParseSchedule(const std::string& name, const std::string& key) {
  if (name == "constant") return EpochSchedule::Kind::kConstant;
  if (name == "floor") return EpochSchedule::Kind::kFloorAfter;
  if (name == "multiplicative") return EpochSchedule::Kind::kMultiplicative;
  throw ConfigError(key + ": unknown schedule '" + name + "'");
}

// Walks a JSON object, assigning known keys and rejecting the rest.
class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(Where() + ": expected an object");
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(Key(key) + ": wrong type");
    }
  }

  // Returns the nested object or nullptr.
  const json* Child(const std::string& key) {
    seen_.push_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void RejectUnknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError("unknown config key '" + Key(it.key()) + "'");
      }
    }
  }

  std::string Key(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }
  std::string Where() const { return prefix_.empty() ? "config" : prefix_; }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<std::string> seen_;
};

json ScheduleToJson(const EpochSchedule& s) {
  return {{"kind", ScheduleName(s.kind)},
          {"after_episode", s.after_episode},
          {"floor_epochs", s.floor_epochs},
          {"factor", s.factor}};
}

void ReadSchedule(const json& j, const std::string& prefix, EpochSchedule& s) {
  Reader r(j, prefix);
  std::string kind(ScheduleName(s.kind));
  r.Get("kind", kind);
  s.kind = ParseSchedule(kind, r.Key("kind"));
  r.Get("after_episode", s.after_episode);
  r.Get("floor_epochs", s.floor_epochs);
  r.Get("factor", s.factor);
  r.RejectUnknown();
}

void ModelToJson(const ModelSection& m, json& j) {
  j["hidden_layers"] = m.hidden_layers;
  j["hidden_size"] = m.hidden_size;
  j["epochs"] = m.epochs;
  j["batch_size"] = m.batch_size;
  j["learning_rate"] = m.learning_rate;
  j["schedule"] = ScheduleToJson(m.schedule);
}

void ReadModel(Reader& r, ModelSection& m) {
  r.Get("hidden_layers", m.hidden_layers);
  r.Get("hidden_size", m.hidden_size);
  r.Get("epochs", m.epochs);
  r.Get("batch_size", m.batch_size);
  r.Get("learning_rate", m.learning_rate);
  if (const json* s = r.Child("schedule")) ReadSchedule(*s, r.Key("schedule"), m.schedule);
}

void ValidateModel(const ModelSection& m, const std::string& name) {
  if (m.hidden_layers < 0) throw ConfigError(name + ".hidden_layers must be >= 0");
  if (m.hidden_size < 1) throw ConfigError(name + ".hidden_size must be >= 1");
  if (m.epochs < 1) throw ConfigError(name + ".epochs must be >= 1");
  if (m.batch_size < 1) throw ConfigError(name + ".batch_size must be >= 1");
  if (!(m.learning_rate > 0.0) || !std::isfinite(m.learning_rate)) {
    throw ConfigError(name + ".learning_rate must be positive");
  }
  try {
    m.schedule.Validate();
  } catch (const ConfigError& e) {
    throw ConfigError(name + ".schedule: " + e.what());
  }
}

}  // namespace

void EpochSchedule::Validate() const {
  if (kind == Kind::kFloorAfter && (floor_epochs < 1 || after_episode < 0)) {
    throw ConfigError("floor schedule needs floor_epochs >= 1 and after_episode >= 0");
  }
  if (kind == Kind::kMultiplicative && !(factor > 0.0 && factor <= 1.0)) {
    throw ConfigError("multiplicative schedule needs factor in (0, 1]");
  }
}

int ScheduledEpochs(int base_epochs, int episode, const EpochSchedule& schedule) {
  switch (schedule.kind) {
    case EpochSchedule::Kind::kFloorAfter:
      return episode > schedule.after_episode ? std::min(base_epochs, schedule.floor_epochs)
                                              : base_epochs;
    case EpochSchedule::Kind::kMultiplicative: {
      double e = std::round(base_epochs * std::pow(schedule.factor, episode));
      return std::max(1, static_cast<int>(e));
    }
    case EpochSchedule::Kind::kConstant:
      break;
  }
  return base_epochs;
}

std::vector<std::size_t> ModelSection::HiddenSizes() const {
  return std::vector<std::size_t>(static_cast<std::size_t>(hidden_layers),
                                  static_cast<std::size_t>(hidden_size));
}

void ExperimentConfig::Validate() const {
  auto names = EnvironmentNames();
  if (std::find(names.begin(), names.end(), env) == names.end()) {
    throw ConfigError("env: unknown environment '" + env + "'");
  }
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (random_episodes < 1) {
    throw ConfigError("random_episodes must be >= 1 (models need data)");
  }
  if (random_episodes > episodes) throw ConfigError("random_episodes exceeds episodes");
  if (episode_length < 0) throw ConfigError("episode_length must be >= 0");
  ValidateModel(dynamics, "dynamics");
  ValidateModel(regularizer.model, "regularizer");
  if (!(regularizer.noise_sigma > 0.0) || !std::isfinite(regularizer.noise_sigma)) {
    throw ConfigError("regularizer.noise_sigma must be positive");
  }
  if (!(regularizer.alpha >= 0.0) || !std::isfinite(regularizer.alpha)) {
    throw ConfigError("regularizer.alpha must be >= 0");
  }
  auto spec = MakeEnvironment(env)->spec();
  try {
    MakePlannerConfig(*MakeEnvironment(env), 0).Validate(spec.action_dim);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("planner: ") + e.what());
  }
}

int ExperimentConfig::EpisodeLength(const Environment& e) const {
  return episode_length > 0 ? episode_length : e.spec().episode_length;
}

PlannerConfig ExperimentConfig::MakePlannerConfig(const Environment& e,
                                                  std::uint64_t plan_seed) const {
  PlannerConfig p;
  p.horizon = planner.horizon;
  p.alpha = regularizer.kind == RegularizerKind::kNone ? 0.0 : regularizer.alpha;
  p.regularizer = regularizer.kind;
  p.population = planner.population;
  p.elites = planner.elites;
  p.iterations = planner.cem_iterations;
  p.init_std = planner.init_std;
  p.std_floor = planner.std_floor;
  p.shift_warm_start = planner.shift_warm_start;
  p.seed = plan_seed;
  p.threads = planner.threads;
  return p.WithBounds(e.spec());
}

ExperimentConfig PresetConfig(const std::string& env) {
  ExperimentConfig c;
  c.env = env;
  c.dynamics.hidden_layers = 2;
  c.dynamics.hidden_size = 32;
  c.dynamics.epochs = 100;
  c.dynamics.batch_size = 32;
  c.dynamics.learning_rate = 3e-3;
  c.regularizer.kind = RegularizerKind::kDeen;
  c.regularizer.model.hidden_layers = 2;
  c.regularizer.model.hidden_size = 32;
  c.regularizer.model.epochs = 50;
  c.regularizer.model.batch_size = 32;
  c.regularizer.model.learning_rate = 1e-3;
  c.regularizer.noise_sigma = 0.3;
  c.regularizer.alpha = 0.05;
  c.planner.horizon = 15;
  c.planner.population = 100;
  c.planner.elites = 10;
  c.planner.cem_iterations = 5;
  c.episodes = 10;
  c.random_episodes = 1;
  if (env == "pendulum") {
    // defaults above
  } else if (env == "cartpole") {
    c.random_episodes = 3;  // swing-up needs broader initial coverage
  } else if (env == "point_mass") {
    c.episodes = 5;
    c.planner.horizon = 10;
  } else {
    throw ConfigError("no preset for environment '" + env + "'");
  }
  return c;
}

std::string ConfigToJson(const ExperimentConfig& c) {
  json j;
  j["env"] = c.env;
  j["episodes"] = c.episodes;
  j["random_episodes"] = c.random_episodes;
  j["episode_length"] = c.episode_length;
  j["warm_start_models"] = c.warm_start_models;
  j["record_wall_clock"] = c.record_wall_clock;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  json d;
  ModelToJson(c.dynamics, d);
  j["dynamics"] = d;
  json r;
  r["kind"] = RegularizerName(c.regularizer.kind);
  ModelToJson(c.regularizer.model, r);
  r["noise_sigma"] = c.regularizer.noise_sigma;
  r["alpha"] = c.regularizer.alpha;
  j["regularizer"] = r;
  j["planner"] = {{"horizon", c.planner.horizon},
                  {"population", c.planner.population},
                  {"elites", c.planner.elites},
                  {"cem_iterations", c.planner.cem_iterations},
                  {"std_floor", c.planner.std_floor},
                  {"init_std", c.planner.init_std},
                  {"shift_warm_start", c.planner.shift_warm_start},
                  {"threads", c.planner.threads}};
  return j.dump(2) + "\n";
}

ExperimentConfig ConfigFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Reader top(j, "");
  std::string env = "pendulum";
  top.Get("env", env);
  ExperimentConfig c = PresetConfig(env);
  top.Get("episodes", c.episodes);
  top.Get("random_episodes", c.random_episodes);
  top.Get("episode_length", c.episode_length);
  top.Get("warm_start_models", c.warm_start_models);
  top.Get("record_wall_clock", c.record_wall_clock);
  top.Get("seed", c.seed);
  top.Get("output_dir", c.output_dir);
  if (const json* d = top.Child("dynamics")) {
    Reader r(*d, "dynamics");
    ReadModel(r, c.dynamics);
    r.RejectUnknown();
  }
  if (const json* g = top.Child("regularizer")) {
    Reader r(*g, "regularizer");
    std::string kind(RegularizerName(c.regularizer.kind));
    r.Get("kind", kind);
    try {
      c.regularizer.kind = ParseRegularizer(kind);
    } catch (const std::exception&) {
      throw ConfigError("regularizer.kind: unknown regularizer '" + kind + "'");
    }
    ReadModel(r, c.regularizer.model);
    r.Get("noise_sigma", c.regularizer.noise_sigma);
    r.Get("alpha", c.regularizer.alpha);
    r.RejectUnknown();
  }
  if (const json* p = top.Child("planner")) {
    Reader r(*p, "planner");
    r.Get("horizon", c.planner.horizon);
    r.Get("population", c.planner.population);
    r.Get("elites", c.planner.elites);
    r.Get("cem_iterations", c.planner.cem_iterations);
    r.Get("std_floor", c.planner.std_floor);
    r.Get("init_std", c.planner.init_std);
    r.Get("shift_warm_start", c.planner.shift_warm_start);
    r.Get("threads", c.planner.threads);
    r.RejectUnknown();
  }
  top.RejectUnknown();
  c.Validate();
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ConfigFromJson(ss.str());
}

}  // namespace ebplan
