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

#ifndef EBPLAN_SRC_BATCHING_H_
#define EBPLAN_SRC_BATCHING_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "ebplan/tensor.h"

namespace ebplan::internal {

inline Tensor GatherRows(const Tensor& data, std::span<const std::size_t> idx) {
  Tensor out(idx.size(), data.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(data.row(idx[i]).data(), data.cols(), out.row(i).data());
  }
  return out;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

// Random holdout of floor(fraction * n) rows, at most n - 1. Without a
// holdout the training rows double as the monitoring set.
inline Split SplitHoldout(std::size_t n, double fraction, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t h = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  h = std::min(h, n - 1);
  Split s;
  s.holdout.assign(perm.begin(), perm.begin() + h);
  s.train.assign(perm.begin() + h, perm.end());
  std::sort(s.holdout.begin(), s.holdout.end());
  std::sort(s.train.begin(), s.train.end());
  if (s.holdout.empty()) s.holdout = s.train;
  return s;
}

}  // namespace ebplan::internal

#endif  // EBPLAN_SRC_BATCHING_H_
