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

#include "ebplan/normalizer.h"

#include <cmath>

#include "ebplan/errors.h"

namespace ebplan {

namespace {
constexpr double kMinStd = 1e-9;
}

Normalizer Normalizer::Fit(const Tensor& rows) {
  if (rows.empty()) throw ContractError("cannot fit a normalizer to no data");
  const std::size_t n = rows.rows(), d = rows.cols();
  Normalizer out;
  out.mean.assign(d, 0.0);
  out.std.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += rows(i, j);
  }
  for (double& m : out.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double c = rows(i, j) - out.mean[j];
      out.std[j] += c * c;
    }
  }
  for (double& s : out.std) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > kMinStd)) {
      s = 1.0;
      out.degenerate = true;
    }
  }
  return out;
}

Normalizer Normalizer::Identity(std::size_t dim) {
  return Normalizer{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0),
                    false};
}

void Normalizer::Normalize(std::span<const double> in,
                           std::span<double> out) const {
  for (std::size_t j = 0; j < mean.size(); ++j) out[j] = (in[j] - mean[j]) / std[j];
}

void Normalizer::Denormalize(std::span<const double> in,
                             std::span<double> out) const {
  for (std::size_t j = 0; j < mean.size(); ++j) out[j] = in[j] * std[j] + mean[j];
}

void Normalizer::NormalizeRows(std::span<const double> in, std::size_t rows,
                               std::span<double> out) const {
  const std::size_t d = dim();
  for (std::size_t r = 0; r < rows; ++r) {
    Normalize(in.subspan(r * d, d), out.subspan(r * d, d));
  }
}

Tensor Normalizer::NormalizeRows(const Tensor& rows) const {
  if (rows.cols() != dim()) {
    throw ShapeError("normalizer expects width " + std::to_string(dim()));
  }
  Tensor out = rows;
  NormalizeRows(rows.data(), rows.rows(), out.data());
  return out;
}

}  // namespace ebplan
