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

#include "ebplan/adam.h"

#include <cmath>
#include <span>
#include <string>

#include "ebplan/errors.h"

namespace ebplan {
namespace {

void CheckAligned(const NetworkParams& a, const NetworkParams& b,
                  const char* what) {
  if (a.layers.size() != b.layers.size()) {
    throw ShapeError(std::string(what) + ": layer count mismatch");
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight.shape() != b.layers[i].weight.shape() ||
        a.layers[i].bias.size() != b.layers[i].bias.size()) {
      throw ShapeError(std::string(what) + ": shape mismatch in layer " +
                       std::to_string(i));
    }
  }
}

void UpdateBlock(std::span<double> p, std::span<const double> g,
                 std::span<double> m, std::span<double> v,
                 const AdamOptions& o, double correction1, double correction2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
    double m_hat = m[i] / correction1;
    double v_hat = v[i] / correction2;
    p[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

}  // namespace

AdamState AdamState::For(const NetworkParams& params, AdamOptions options) {
  if (!(options.learning_rate > 0.0) || !(options.epsilon > 0.0) ||
      !(options.beta1 > 0.0 && options.beta1 < 1.0) ||
      !(options.beta2 > 0.0 && options.beta2 < 1.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  return AdamState{params.ZerosLike(), params.ZerosLike(), 0, options};
}

void AdamUpdate(NetworkParams& params, const NetworkParams& grads,
                AdamState& state) {
  CheckAligned(params, grads, "adam gradients");
  CheckAligned(params, state.first_moment, "adam state");
  state.step += 1;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    Layer& p = params.layers[i];
    const Layer& g = grads.layers[i];
    UpdateBlock(p.weight.data(), g.weight.data(),
                state.first_moment.layers[i].weight.data(),
                state.second_moment.layers[i].weight.data(), o, correction1,
                correction2);
    UpdateBlock(p.bias.data(), g.bias.data(),
                state.first_moment.layers[i].bias.data(),
                state.second_moment.layers[i].bias.data(), o, correction1,
                correction2);
  }
}

std::pair<NetworkParams, AdamState> AdamStep(NetworkParams params,
                                             const NetworkParams& grads,
                                             AdamState state) {
  AdamUpdate(params, grads, state);
  return {std::move(params), std::move(state)};
}

}  // namespace ebplan
