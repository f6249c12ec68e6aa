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

#ifndef EBPLAN_ACTIVATION_H_
#define EBPLAN_ACTIVATION_H_

#include <cmath>
#include <string>
#include <string_view>

namespace ebplan {

enum class Activation {
  kIdentity,
  kSoftplus,
  kTanh,
};

std::string_view ActivationName(Activation activation);
Activation ParseActivation(std::string_view name);

// log(1 + e^x) without overflow for large |x|.
inline double SoftplusValue(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double SigmoidValue(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double Activate(Activation activation, double x) {
  switch (activation) {
    case Activation::kSoftplus:
      return SoftplusValue(x);
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

// First derivative expressed through the pre-activation.
inline double ActivateDerivative(Activation activation, double x) {
  switch (activation) {
    case Activation::kSoftplus:
      return SigmoidValue(x);
    case Activation::kTanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kIdentity:
      break;
  }
  return 1.0;
}

}  // namespace ebplan

#endif  // EBPLAN_ACTIVATION_H_
