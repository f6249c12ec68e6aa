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

#ifndef EBPLAN_AUTODIFF_H_
#define EBPLAN_AUTODIFF_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ebplan/tensor.h"

// Reverse-mode differentiation over a tape of matrix operations.
//
// Every backward rule is itself written in terms of recorded operations, so
// the gradients returned by Tape::Gradient live on the same tape and can be
// differentiated again. That is what makes losses built from input gradients
// (gradient penalties, score matching) trainable.
namespace ebplan::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // Receives the incoming gradient, the node itself, and which parents need a
  // gradient. Returns one entry per parent; an invalid Var means "no gradient".
  using BackwardFn = std::function<std::vector<Var>(
      const Var& grad, const Var& self, const std::vector<bool>& needed)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Node that never receives a gradient.
  Var Constant(Tensor value);
  // Differentiable leaf.
  Var Variable(Tensor value);

  Var Record(Tensor value, std::vector<int> parents, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Gradients of the 1 x 1 node `output` with respect to each of `wrt`. The
  // backward pass is recorded on this tape. Leaves that `output` does not
  // depend on get a zero constant of matching shape.
  std::vector<Var> Gradient(const Var& output, std::span<const Var> wrt);

 private:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

// Matrix products: a*b, a^T*b and a*b^T.
Var MatMul(const Var& a, const Var& b);
Var MatMulTA(const Var& a, const Var& b);
Var MatMulTB(const Var& a, const Var& b);

Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);  // elementwise
Var Scale(const Var& a, double factor);
Var Affine(const Var& a, double scale, double shift);  // scale*a + shift
Var Square(const Var& a);

// x (n x m) plus a 1 x m row added to every row.
Var AddRow(const Var& x, const Var& row);
Var SumRows(const Var& x);                          // n x m -> 1 x m
Var BroadcastRows(const Var& row, std::size_t n);   // 1 x m -> n x m
Var Sum(const Var& x);                              // -> 1 x 1
Var Expand(const Var& scalar, std::size_t rows, std::size_t cols);

Var ColumnSlice(const Var& x, std::size_t begin, std::size_t count);
Var PadColumns(const Var& x, std::size_t begin, std::size_t total);

Var Softplus(const Var& x);
Var Sigmoid(const Var& x);
Var Tanh(const Var& x);
Var Exp(const Var& x);

}  // namespace ebplan::ad

#endif  // EBPLAN_AUTODIFF_H_
