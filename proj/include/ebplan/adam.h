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

#ifndef EBPLAN_ADAM_H_
#define EBPLAN_ADAM_H_

#include <cstdint>
#include <utility>

#include "ebplan/network.h"

namespace ebplan {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  NetworkParams first_moment;
  NetworkParams second_moment;
  std::int64_t step = 0;
  AdamOptions options;

  static AdamState For(const NetworkParams& params, AdamOptions options = {});
};

// Bias-corrected Adam update applied in place.
void AdamUpdate(NetworkParams& params, const NetworkParams& grads,
                AdamState& state);

// Value-returning form of AdamUpdate.
std::pair<NetworkParams, AdamState> AdamStep(NetworkParams params,
                                             const NetworkParams& grads,
                                             AdamState state);

}  // namespace ebplan

#endif  // EBPLAN_ADAM_H_
