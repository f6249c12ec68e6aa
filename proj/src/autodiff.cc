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

#include "ebplan/autodiff.h"

#include <cmath>
#include <string>
#include <utility>

#include "ebplan/activation.h"
#include "ebplan/errors.h"

namespace ebplan::ad {
namespace {

Tensor Zeros(std::size_t rows, std::size_t cols) {
  return Tensor(rows, cols, 0.0);
}

void RequireSameTape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ContractError("operands must be valid vars on the same tape");
  }
}

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  if (!a.value().SameShape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeString({a.rows(), a.cols()}) + " vs " +
                     ShapeString({b.rows(), b.cols()}));
  }
}

// out(n x m) = a(n x k) * b(k x m)
Tensor MatMulValue(const Tensor& a, const Tensor& b) {
  std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out = Zeros(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data().data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      double s = a(i, p);
      const double* brow = b.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * brow[j];
    }
  }
  return out;
}

// out(n x m) = a(k x n)^T * b(k x m)
Tensor MatMulTAValue(const Tensor& a, const Tensor& b) {
  std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  Tensor out = Zeros(n, m);
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b.data().data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      double s = a(p, i);
      double* o = out.data().data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * brow[j];
    }
  }
  return out;
}

// out(n x m) = a(n x k) * b(m x k)^T
Tensor MatMulTBValue(const Tensor& a, const Tensor& b) {
  std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Tensor out = Zeros(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data().data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data().data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      out(i, j) = s;
    }
  }
  return out;
}

template <typename F>
Tensor Map(const Tensor& x, F f) {
  Tensor out = Zeros(x.rows(), x.cols());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor Zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out = Zeros(a.rows(), a.cols());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

Var Unary(const Var& x, Tensor value, Tape::BackwardFn fn) {
  return x.tape()->Record(std::move(value), {x.id()}, std::move(fn));
}

Var Binary(const Var& a, const Var& b, Tensor value, Tape::BackwardFn fn) {
  return a.tape()->Record(std::move(value), {a.id(), b.id()}, std::move(fn));
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::Constant(Tensor value) {
  if (value.rank() == 1) value = value.Reshaped({1, value.size()});
  nodes_.push_back(Node{std::move(value), {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Variable(Tensor value) {
  if (value.rank() == 1) value = value.Reshaped({1, value.size()});
  nodes_.push_back(Node{std::move(value), {}, nullptr, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Record(Tensor value, std::vector<int> parents, BackwardFn backward) {
  bool needs_grad = false;
  for (int p : parents) needs_grad = needs_grad || nodes_[p].requires_grad;
  if (!needs_grad) backward = nullptr;
  nodes_.push_back(
      Node{std::move(value), std::move(parents), std::move(backward), needs_grad});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

std::vector<Var> Tape::Gradient(const Var& output, std::span<const Var> wrt) {
  if (output.tape() != this) throw ContractError("output is on another tape");
  if (output.rows() != 1 || output.cols() != 1) {
    throw ContractError("gradient requires a 1 x 1 output");
  }
  const int out = output.id();

  // Only nodes lying on a path from some `wrt` leaf to the output matter.
  std::vector<bool> relevant(out + 1, false);
  for (const Var& w : wrt) {
    if (w.tape() != this) throw ContractError("wrt var is on another tape");
    if (w.id() <= out) relevant[w.id()] = true;
  }
  for (int id = 0; id <= out; ++id) {
    if (relevant[id] || !nodes_[id].requires_grad) continue;
    for (int p : nodes_[id].parents) {
      if (relevant[p]) {
        relevant[id] = true;
        break;
      }
    }
  }

  std::vector<Var> grads(out + 1);
  if (relevant[out]) grads[out] = Constant(Tensor(1, 1, 1.0));
  for (int id = out; id >= 0; --id) {
    if (!grads[id].valid() || !nodes_[id].backward) continue;
    // Recording below may reallocate nodes_, so copy what we need first.
    std::vector<int> parents = nodes_[id].parents;
    BackwardFn backward = nodes_[id].backward;
    std::vector<bool> needed(parents.size());
    bool any = false;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      needed[i] = relevant[parents[i]] && nodes_[parents[i]].requires_grad;
      any = any || needed[i];
    }
    if (!any) continue;
    std::vector<Var> parent_grads = backward(grads[id], Var(this, id), needed);
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (!needed[i] || !parent_grads[i].valid()) continue;
      Var& acc = grads[parents[i]];
      acc = acc.valid() ? ad::Add(acc, parent_grads[i]) : parent_grads[i];
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= out && grads[w.id()].valid()) {
      result.push_back(grads[w.id()]);
    } else {
      result.push_back(Constant(Zeros(w.rows(), w.cols())));
    }
  }
  return result;
}

Var MatMul(const Var& a, const Var& b) {
  RequireSameTape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("MatMul: inner dimensions " + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + " differ");
  }
  return Binary(a, b, MatMulValue(a.value(), b.value()),
                [a, b](const Var& g, const Var&, const std::vector<bool>& need) {
                  return std::vector<Var>{need[0] ? MatMulTB(g, b) : Var(),
                                          need[1] ? MatMulTA(a, g) : Var()};
                });
}

Var MatMulTA(const Var& a, const Var& b) {
  RequireSameTape(a, b);
  if (a.rows() != b.rows()) throw ShapeError("MatMulTA: row counts differ");
  return Binary(a, b, MatMulTAValue(a.value(), b.value()),
                [a, b](const Var& g, const Var&, const std::vector<bool>& need) {
                  return std::vector<Var>{need[0] ? MatMulTB(b, g) : Var(),
                                          need[1] ? MatMul(a, g) : Var()};
                });
}

Var MatMulTB(const Var& a, const Var& b) {
  RequireSameTape(a, b);
  if (a.cols() != b.cols()) throw ShapeError("MatMulTB: column counts differ");
  return Binary(a, b, MatMulTBValue(a.value(), b.value()),
                [a, b](const Var& g, const Var&, const std::vector<bool>& need) {
                  return std::vector<Var>{need[0] ? MatMul(g, b) : Var(),
                                          need[1] ? MatMulTA(g, a) : Var()};
                });
}

Var Add(const Var& a, const Var& b) {
  RequireSameTape(a, b);
  RequireSameShape(a, b, "Add");
  return Binary(a, b,
                Zip(a.value(), b.value(), [](double x, double y) { return x + y; }),
                [](const Var& g, const Var&, const std::vector<bool>& need) {
                  return std::vector<Var>{need[0] ? g : Var(),
                                          need[1] ? g : Var()};
                });
}

Var Sub(const Var& a, const Var& b) {
  RequireSameTape(a, b);
  RequireSameShape(a, b, "Sub");
  return Binary(a, b,
                Zip(a.value(), b.value(), [](double x, double y) { return x - y; }),
                [](const Var& g, const Var&, const std::vector<bool>& need) {
                  return std::vector<Var>{need[0] ? g : Var(),
                                          need[1] ? Scale(g, -1.0) : Var()};
                });
}

Var Mul(const Var& a, const Var& b) {
  RequireSameTape(a, b);
  RequireSameShape(a, b, "Mul");
  return Binary(a, b,
                Zip(a.value(), b.value(), [](double x, double y) { return x * y; }),
                [a, b](const Var& g, const Var&, const std::vector<bool>& need) {
                  return std::vector<Var>{need[0] ? Mul(g, b) : Var(),
                                          need[1] ? Mul(g, a) : Var()};
                });
}

Var Scale(const Var& a, double factor) { return Affine(a, factor, 0.0); }

Var Affine(const Var& a, double scale, double shift) {
  return Unary(a,
               Map(a.value(), [scale, shift](double x) { return scale * x + shift; }),
               [scale](const Var& g, const Var&, const std::vector<bool>&) {
                 return std::vector<Var>{Affine(g, scale, 0.0)};
               });
}

Var Square(const Var& a) { return Mul(a, a); }

Var AddRow(const Var& x, const Var& row) {
  RequireSameTape(x, row);
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("AddRow: row must be 1 x " + std::to_string(x.cols()));
  }
  Tensor out = x.value();
  const Tensor& r = row.value();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r[j];
  }
  return Binary(x, row, std::move(out),
                [](const Var& g, const Var&, const std::vector<bool>& need) {
                  return std::vector<Var>{need[0] ? g : Var(),
                                          need[1] ? SumRows(g) : Var()};
                });
}

Var SumRows(const Var& x) {
  Tensor out = Zeros(1, x.cols());
  const Tensor& v = x.value();
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) out[j] += v(i, j);
  }
  std::size_t n = x.rows();
  return Unary(x, std::move(out),
               [n](const Var& g, const Var&, const std::vector<bool>&) {
                 return std::vector<Var>{BroadcastRows(g, n)};
               });
}

Var BroadcastRows(const Var& row, std::size_t n) {
  if (row.rows() != 1) throw ShapeError("BroadcastRows: expected a 1 x m row");
  Tensor out = Zeros(n, row.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < row.cols(); ++j) out(i, j) = row.value()[j];
  }
  return Unary(row, std::move(out),
               [](const Var& g, const Var&, const std::vector<bool>&) {
                 return std::vector<Var>{SumRows(g)};
               });
}

Var Sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  std::size_t r = x.rows(), c = x.cols();
  return Unary(x, Tensor(1, 1, s),
               [r, c](const Var& g, const Var&, const std::vector<bool>&) {
                 return std::vector<Var>{Expand(g, r, c)};
               });
}

Var Expand(const Var& scalar, std::size_t rows, std::size_t cols) {
  if (scalar.rows() != 1 || scalar.cols() != 1) {
    throw ShapeError("Expand: expected a 1 x 1 input");
  }
  return Unary(scalar, Tensor(rows, cols, scalar.value()[0]),
               [](const Var& g, const Var&, const std::vector<bool>&) {
                 return std::vector<Var>{Sum(g)};
               });
}

Var ColumnSlice(const Var& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.cols()) {
    throw ShapeError("ColumnSlice: columns out of range");
  }
  Tensor out = Zeros(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x.value()(i, begin + j);
  }
  std::size_t total = x.cols();
  return Unary(x, std::move(out),
               [begin, total](const Var& g, const Var&, const std::vector<bool>&) {
                 return std::vector<Var>{PadColumns(g, begin, total)};
               });
}

Var PadColumns(const Var& x, std::size_t begin, std::size_t total) {
  if (begin + x.cols() > total) throw ShapeError("PadColumns: out of range");
  Tensor out = Zeros(x.rows(), total);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, begin + j) = x.value()(i, j);
  }
  std::size_t count = x.cols();
  return Unary(x, std::move(out),
               [begin, count](const Var& g, const Var&, const std::vector<bool>&) {
                 return std::vector<Var>{ColumnSlice(g, begin, count)};
               });
}

Var Softplus(const Var& x) {
  return Unary(x, Map(x.value(), SoftplusValue),
               [x](const Var& g, const Var&, const std::vector<bool>&) {
                 return std::vector<Var>{Mul(g, Sigmoid(x))};
               });
}

Var Sigmoid(const Var& x) {
  return Unary(x, Map(x.value(), SigmoidValue),
               [](const Var& g, const Var& self, const std::vector<bool>&) {
                 // s' = s (1 - s)
                 return std::vector<Var>{
                     Mul(g, Mul(self, Affine(self, -1.0, 1.0)))};
               });
}

Var Tanh(const Var& x) {
  return Unary(x, Map(x.value(), [](double v) { return std::tanh(v); }),
               [](const Var& g, const Var& self, const std::vector<bool>&) {
                 // t' = 1 - t^2
                 return std::vector<Var>{
                     Mul(g, Affine(Mul(self, self), -1.0, 1.0))};
               });
}

Var Exp(const Var& x) {
  return Unary(x, Map(x.value(), [](double v) { return std::exp(v); }),
               [](const Var& g, const Var& self, const std::vector<bool>&) {
                 return std::vector<Var>{Mul(g, self)};
               });
}

}  // namespace ebplan::ad
