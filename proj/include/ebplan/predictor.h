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

#ifndef EBPLAN_PREDICTOR_H_
#define EBPLAN_PREDICTOR_H_

#include <cstddef>
#include <span>
#include <vector>

#include "ebplan/tensor.h"

namespace ebplan {

struct Prediction {
  std::vector<double> mean;      // next state
  std::vector<double> variance;  // per state dimension
};

// Anything that maps (s, a) to a next-state distribution: the learned
// dynamics model or an environment's exact step. Implementations are
// immutable and safe to call from several threads.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;

  // Checked single prediction.
  virtual Prediction Predict(std::span<const double> state,
                             std::span<const double> action) const = 0;

  // Means for `rows` (state, action) pairs, unchecked. `states` is
  // rows x state_dim, `actions` rows x action_dim, `next` rows x state_dim.
  // Each row's result must not depend on the other rows.
  virtual void PredictMeanBatch(std::span<const double> states,
                                std::span<const double> actions,
                                std::size_t rows,
                                std::span<double> next) const = 0;
};

// Iterated mean predictions: row t of the result is the state after applying
// action t. `actions` is (H + 1) x action_dim. Throws RolloutError naming the
// first step whose successor is non-finite.
Tensor Rollout(const Predictor& predictor, std::span<const double> s0,
               const Tensor& actions);

}  // namespace ebplan

#endif  // EBPLAN_PREDICTOR_H_
