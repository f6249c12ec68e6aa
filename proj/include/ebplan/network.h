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

#ifndef EBPLAN_NETWORK_H_
#define EBPLAN_NETWORK_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ebplan/activation.h"
#include "ebplan/autodiff.h"
#include "ebplan/tensor.h"

namespace ebplan {

struct Layer {
  Tensor weight;  // fan_out x fan_in
  Tensor bias;    // fan_out (rank 1)
  Activation activation = Activation::kIdentity;

  std::size_t fan_in() const { return weight.cols(); }
  std::size_t fan_out() const { return weight.rows(); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

// Weights of a feedforward network. The same type doubles as the container
// for parameter gradients and Adam moments.
struct NetworkParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  // Throws ShapeError if consecutive layers do not chain, NumericError if any
  // weight is non-finite.
  void Validate() const;
  NetworkParams ZerosLike() const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

// Layer widths including input and output, e.g. {3, 64, 64, 1}. Hidden layers
// use `hidden`, the last layer is identity. Weights are uniform in
// [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
NetworkParams InitNetwork(std::span<const std::size_t> widths,
                          Activation hidden, std::mt19937_64& rng);

// Output of the final layer for a rank-1 input or a batch of rows. Checks
// every layer for non-finite activations.
Tensor Forward(const NetworkParams& params, const Tensor& input);

// Gradient of the scalar network output with respect to the input (same
// shape as input). Rows of a batch are treated independently.
Tensor InputGradient(const NetworkParams& params, const Tensor& input);

// Inference form of a network: weights stored transposed so the hot loops
// run over contiguous memory. Each output row depends only on its input row,
// and the arithmetic is identical regardless of how many rows are evaluated
// together.
class CompiledNetwork {
 public:
  CompiledNetwork() = default;
  explicit CompiledNetwork(const NetworkParams& params);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  bool empty() const { return layers_.empty(); }

  // `in` holds rows x input_dim values, `out` rows x output_dim. No finiteness
  // checks; callers inspect the output.
  void Forward(std::span<const double> in, std::size_t rows,
               std::span<double> out) const;

  // For each row, J^T * cotangent where J is the network Jacobian at that row.
  // `cotangent` is rows x output_dim, `grad_in` rows x input_dim.
  void VectorJacobianProduct(std::span<const double> in, std::size_t rows,
                             std::span<const double> cotangent,
                             std::span<double> grad_in) const;

 private:
  struct CompiledLayer {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::vector<double> weight_t;  // fan_in x fan_out
    std::vector<double> weight;    // fan_out x fan_in
    std::vector<double> bias;
    Activation activation = Activation::kIdentity;
  };

  std::vector<CompiledLayer> layers_;
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  std::size_t max_width_ = 0;
};

// A network whose parameters are leaves on a tape.
struct TapedNetwork {
  std::vector<ad::Var> weights;  // fan_out x fan_in
  std::vector<ad::Var> biases;   // 1 x fan_out
  std::vector<Activation> activations;
};

TapedNetwork LoadOnTape(ad::Tape& tape, const NetworkParams& params);

// Batch forward: input is n x fan_in, result n x fan_out.
ad::Var TapedForward(const TapedNetwork& net, const ad::Var& input);

// d(sum of outputs)/d(input) for a scalar-output network, recorded on the
// tape so a loss built from it can be differentiated with respect to the
// parameters.
ad::Var TapedInputGradient(const TapedNetwork& net, const ad::Var& input);

// Gradients of a scalar loss with respect to every parameter of `net`, shaped
// like `like`. Includes second-order paths through TapedInputGradient.
NetworkParams ParamGradients(const ad::Var& loss, const TapedNetwork& net,
                             const NetworkParams& like);

}  // namespace ebplan

#endif  // EBPLAN_NETWORK_H_
