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

#ifndef EBPLAN_NORMALIZER_H_
#define EBPLAN_NORMALIZER_H_

#include <cstddef>
#include <span>
#include <vector>

#include "ebplan/tensor.h"

namespace ebplan {

// Per-dimension z-scoring. Dimensions with (near) zero spread get std = 1 and
// set `degenerate`, so a constant column never divides by zero.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;
  bool degenerate = false;

  static Normalizer Fit(const Tensor& rows);
  static Normalizer Identity(std::size_t dim);

  std::size_t dim() const { return mean.size(); }

  void Normalize(std::span<const double> in, std::span<double> out) const;
  void Denormalize(std::span<const double> in, std::span<double> out) const;
  // Applies Normalize to every row of a rows x dim buffer.
  void NormalizeRows(std::span<const double> in, std::size_t rows,
                     std::span<double> out) const;
  Tensor NormalizeRows(const Tensor& rows) const;

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

}  // namespace ebplan

#endif  // EBPLAN_NORMALIZER_H_
