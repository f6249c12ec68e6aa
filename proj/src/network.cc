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

#include "ebplan/network.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "ebplan/errors.h"

namespace ebplan {
namespace {

std::vector<std::size_t> OutputShape(const Tensor& input, std::size_t width) {
  if (input.rank() == 1) return {width};
  return {input.rows(), width};
}

void CheckInput(const NetworkParams& params, const Tensor& input) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (input.empty() || input.cols() != params.input_dim()) {
    throw ShapeError("network expects input width " +
                     std::to_string(params.input_dim()) + ", got shape " +
                     ShapeString(input.shape()));
  }
}

}  // namespace

std::string_view ActivationName(Activation activation) {
  switch (activation) {
    case Activation::kSoftplus:
      return "softplus";
    case Activation::kTanh:
      return "tanh";
    case Activation::kIdentity:
      break;
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  if (name == "softplus") return Activation::kSoftplus;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::size_t NetworkParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().fan_in();
}

std::size_t NetworkParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().fan_out();
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void NetworkParams::Validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.weight.rank() != 2 || l.bias.size() != l.fan_out()) {
      throw ShapeError("layer " + std::to_string(i) + ": bias/weight mismatch");
    }
    if (i > 0 && layers[i - 1].fan_out() != l.fan_in()) {
      throw ShapeError("layer " + std::to_string(i) + ": fan_in " +
                       std::to_string(l.fan_in()) + " does not chain with " +
                       std::to_string(layers[i - 1].fan_out()));
    }
    if (!l.weight.AllFinite() || !l.bias.AllFinite()) {
      throw NumericError("layer " + std::to_string(i) + ": non-finite weight");
    }
  }
}

NetworkParams NetworkParams::ZerosLike() const {
  NetworkParams out = *this;
  for (Layer& l : out.layers) {
    std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
    std::fill(l.bias.data().begin(), l.bias.data().end(), 0.0);
  }
  return out;
}

NetworkParams InitNetwork(std::span<const std::size_t> widths,
                          Activation hidden, std::mt19937_64& rng) {
  if (widths.size() < 2) throw ShapeError("network needs at least two widths");
  NetworkParams params;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    std::size_t fan_in = widths[i], fan_out = widths[i + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer{Tensor(fan_out, fan_in), Tensor::Vector(std::vector<double>(fan_out, 0.0)),
                i + 2 == widths.size() ? Activation::kIdentity : hidden};
    for (double& w : layer.weight.data()) w = dist(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

CompiledNetwork::CompiledNetwork(const NetworkParams& params) {
  params.Validate();
  input_dim_ = params.input_dim();
  output_dim_ = params.output_dim();
  max_width_ = input_dim_;
  for (const Layer& l : params.layers) {
    CompiledLayer c;
    c.fan_in = l.fan_in();
    c.fan_out = l.fan_out();
    c.weight.assign(l.weight.data().begin(), l.weight.data().end());
    c.weight_t.resize(c.fan_in * c.fan_out);
    for (std::size_t j = 0; j < c.fan_out; ++j) {
      for (std::size_t k = 0; k < c.fan_in; ++k) {
        c.weight_t[k * c.fan_out + j] = l.weight(j, k);
      }
    }
    c.bias.assign(l.bias.data().begin(), l.bias.data().end());
    c.activation = l.activation;
    max_width_ = std::max(max_width_, c.fan_out);
    layers_.push_back(std::move(c));
  }
}

namespace {

// Pre-activation of one row: out = W x + b with a fixed accumulation order.
inline void LayerPreActivation(const std::vector<double>& weight_t,
                               const std::vector<double>& bias,
                               std::size_t fan_in, std::size_t fan_out,
                               const double* x, double* out) {
  for (std::size_t j = 0; j < fan_out; ++j) out[j] = bias[j];
  for (std::size_t k = 0; k < fan_in; ++k) {
    const double xk = x[k];
    const double* w = &weight_t[k * fan_out];
    for (std::size_t j = 0; j < fan_out; ++j) out[j] += xk * w[j];
  }
}

}  // namespace

void CompiledNetwork::Forward(std::span<const double> in, std::size_t rows,
                              std::span<double> out) const {
  std::vector<double> a(max_width_), b(max_width_);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * input_dim_;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const CompiledLayer& l = layers_[li];
      double* y = li + 1 == layers_.size() ? out.data() + r * output_dim_
                                           : (li % 2 == 0 ? a.data() : b.data());
      LayerPreActivation(l.weight_t, l.bias, l.fan_in, l.fan_out, x, y);
      if (l.activation != Activation::kIdentity) {
        for (std::size_t j = 0; j < l.fan_out; ++j) {
          y[j] = Activate(l.activation, y[j]);
        }
      }
      x = y;
    }
  }
}

void CompiledNetwork::VectorJacobianProduct(std::span<const double> in,
                                            std::size_t rows,
                                            std::span<const double> cotangent,
                                            std::span<double> grad_in) const {
  std::size_t total = 0;
  for (const CompiledLayer& l : layers_) total += l.fan_out;
  std::vector<double> pre(total);
  std::vector<double> act(max_width_);
  std::vector<double> g(max_width_), g_next(max_width_);

  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * input_dim_;
    std::size_t offset = 0;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const CompiledLayer& l = layers_[li];
      double* p = pre.data() + offset;
      LayerPreActivation(l.weight_t, l.bias, l.fan_in, l.fan_out, x, p);
      if (li + 1 < layers_.size()) {
        double* h = li % 2 == 0 ? act.data() : g_next.data();
        for (std::size_t j = 0; j < l.fan_out; ++j) h[j] = Activate(l.activation, p[j]);
        x = h;
      }
      offset += l.fan_out;
    }

    std::copy_n(cotangent.data() + r * output_dim_, output_dim_, g.data());
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const CompiledLayer& l = layers_[li];
      offset -= l.fan_out;
      const double* p = pre.data() + offset;
      for (std::size_t j = 0; j < l.fan_out; ++j) {
        g[j] *= ActivateDerivative(l.activation, p[j]);
      }
      double* dst = li == 0 ? grad_in.data() + r * input_dim_ : g_next.data();
      std::fill(dst, dst + l.fan_in, 0.0);
      for (std::size_t j = 0; j < l.fan_out; ++j) {
        const double gj = g[j];
        const double* w = &l.weight[j * l.fan_in];
        for (std::size_t k = 0; k < l.fan_in; ++k) dst[k] += gj * w[k];
      }
      if (li > 0) std::copy_n(g_next.data(), l.fan_in, g.data());
    }
  }
}

Tensor Forward(const NetworkParams& params, const Tensor& input) {
  CheckInput(params, input);
  const std::size_t rows = input.rows();
  std::vector<double> x(input.data().begin(), input.data().end());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const Layer& layer = params.layers[li];
    // Single-layer compile keeps the arithmetic identical to CompiledNetwork.
    NetworkParams single{{layer}};
    CompiledNetwork c(single);
    std::vector<double> y(rows * layer.fan_out());
    c.Forward(x, rows, y);
    for (double v : y) {
      if (!std::isfinite(v)) {
        throw NumericError("non-finite activation in layer " + std::to_string(li));
      }
    }
    x = std::move(y);
  }
  return Tensor(OutputShape(input, params.output_dim()), std::move(x));
}

Tensor InputGradient(const NetworkParams& params, const Tensor& input) {
  CheckInput(params, input);
  if (params.output_dim() != 1) {
    throw ContractError("input gradient needs a scalar-output network, got " +
                        std::to_string(params.output_dim()) + " outputs");
  }
  CompiledNetwork c(params);
  const std::size_t rows = input.rows();
  std::vector<double> ones(rows, 1.0);
  std::vector<double> grad(input.size());
  c.VectorJacobianProduct(input.data(), rows, ones, grad);
  Tensor out(input.shape(), std::move(grad));
  out.CheckFinite("input gradient");
  return out;
}

TapedNetwork LoadOnTape(ad::Tape& tape, const NetworkParams& params) {
  params.Validate();
  TapedNetwork net;
  for (const Layer& l : params.layers) {
    net.weights.push_back(tape.Variable(l.weight));
    net.biases.push_back(tape.Variable(l.bias));
    net.activations.push_back(l.activation);
  }
  return net;
}

ad::Var TapedForward(const TapedNetwork& net, const ad::Var& input) {
  ad::Var h = input;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    h = ad::AddRow(ad::MatMulTB(h, net.weights[i]), net.biases[i]);
    switch (net.activations[i]) {
      case Activation::kSoftplus:
        h = ad::Softplus(h);
        break;
      case Activation::kTanh:
        h = ad::Tanh(h);
        break;
      case Activation::kIdentity:
        break;
    }
  }
  return h;
}

ad::Var TapedInputGradient(const TapedNetwork& net, const ad::Var& input) {
  ad::Var out = TapedForward(net, input);
  if (out.cols() != 1) {
    throw ContractError("input gradient needs a scalar-output network");
  }
  ad::Var total = ad::Sum(out);
  ad::Var wrt[] = {input};
  return input.tape()->Gradient(total, wrt)[0];
}

NetworkParams ParamGradients(const ad::Var& loss, const TapedNetwork& net,
                             const NetworkParams& like) {
  const double value = loss.value()[0];
  if (!std::isfinite(value)) {
    throw NumericError("loss is not finite (" + std::to_string(value) + ")");
  }
  std::vector<ad::Var> wrt;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    wrt.push_back(net.weights[i]);
    wrt.push_back(net.biases[i]);
  }
  std::vector<ad::Var> grads = loss.tape()->Gradient(loss, wrt);
  NetworkParams out = like;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    const Tensor& gw = grads[2 * i].value();
    const Tensor& gb = grads[2 * i + 1].value();
    std::copy(gw.data().begin(), gw.data().end(), out.layers[i].weight.data().begin());
    std::copy(gb.data().begin(), gb.data().end(), out.layers[i].bias.data().begin());
  }
  return out;
}

}  // namespace ebplan
