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

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "ebplan/errors.h"
#include "ebplan/harness.h"

// Layout, one token stream of whitespace-separated fields:
//   ebplan-model 1 <kind>
//   [bounds <lower> <upper>]          dynamics only
//   [sigma <value>]                   energy and denoiser
//   normalizer <dim> <degenerate> <mean...> <std...>   (twice for dynamics)
//   network <layers>
//   layer <fan_out> <fan_in> <activation> <weights row-major...> <bias...>
//   end
// Every double is written with %a (hexadecimal), which round-trips exactly.

namespace ebplan {
namespace {

constexpr const char* kMagic = "ebplan-model";
constexpr int kVersion = 1;

class Writer {
 public:
  void Word(const std::string& w) { out_ << w << ' '; }
  void Int(std::size_t v) { out_ << v << ' '; }
  void Real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    out_ << buf << ' ';
  }
  void Line() { out_ << '\n'; }
  std::string str() const { return out_.str(); }

  void Normalizer(const ebplan::Normalizer& n) {
    Word("normalizer");
    Int(n.dim());
    Int(n.degenerate ? 1 : 0);
    Line();
    for (double v : n.mean) Real(v);
    Line();
    for (double v : n.std) Real(v);
    Line();
  }

  void Network(const NetworkParams& p) {
    Word("network");
    Int(p.layers.size());
    Line();
    for (const Layer& l : p.layers) {
      Word("layer");
      Int(l.fan_out());
      Int(l.fan_in());
      Word(std::string(ActivationName(l.activation)));
      Line();
      for (double v : l.weight.data()) Real(v);
      Line();
      for (double v : l.bias.data()) Real(v);
      Line();
    }
    Word("end");
    Line();
  }

 private:
  std::ostringstream out_;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : in_(text) {}

  std::string Word() {
    std::string w;
    if (!(in_ >> w)) throw ContractError("model file truncated");
    return w;
  }
  void Expect(const std::string& w) {
    std::string got = Word();
    if (got != w) throw ContractError("model file: expected '" + w + "', got '" + got + "'");
  }
  std::size_t Int() {
    std::string w = Word();
    char* end = nullptr;
    unsigned long long v = std::strtoull(w.c_str(), &end, 10);
    if (end == w.c_str() || *end != '\0') {
      throw ContractError("model file: bad integer '" + w + "'");
    }
    return static_cast<std::size_t>(v);
  }
  double Real() {
    std::string w = Word();
    char* end = nullptr;
    double v = std::strtod(w.c_str(), &end);
    if (end == w.c_str() || *end != '\0') {
      throw ContractError("model file: bad number '" + w + "'");
    }
    return v;
  }

  std::string Header() {
    Expect(kMagic);
    if (Int() != static_cast<std::size_t>(kVersion)) {
      throw ContractError("model file: unsupported version");
    }
    return Word();
  }

  ebplan::Normalizer Normalizer() {
    Expect("normalizer");
    ebplan::Normalizer n;
    std::size_t dim = Int();
    n.degenerate = Int() != 0;
    n.mean.resize(dim);
    n.std.resize(dim);
    for (double& v : n.mean) v = Real();
    for (double& v : n.std) v = Real();
    return n;
  }

  NetworkParams Network() {
    Expect("network");
    NetworkParams p;
    std::size_t count = Int();
    for (std::size_t k = 0; k < count; ++k) {
      Expect("layer");
      std::size_t out = Int();
      std::size_t in = Int();
      Layer l;
      l.activation = ParseActivation(Word());
      l.weight = Tensor(out, in);
      for (double& v : l.weight.data()) v = Real();
      std::vector<double> bias(out);
      for (double& v : bias) v = Real();
      l.bias = Tensor::Vector(std::move(bias));
      p.layers.push_back(std::move(l));
    }
    Expect("end");
    p.Validate();
    return p;
  }

 private:
  std::istringstream in_;
};

void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ContractError("failed writing '" + path + "'");
}

void CheckKind(const std::string& got, const std::string& want) {
  if (got != want) {
    throw ContractError("model file holds a " + got + " model, expected " + want);
  }
}

template <typename Model>
std::string SerializeDensity(const Model& m, const std::string& kind) {
  Writer w;
  w.Word(kMagic);
  w.Int(kVersion);
  w.Word(kind);
  w.Line();
  w.Word("sigma");
  w.Real(m.sigma());
  w.Line();
  w.Normalizer(m.normalizer());
  w.Network(m.params());
  return w.str();
}

}  // namespace

std::string SerializeModel(const DynamicsModel& m) {
  Writer w;
  w.Word(kMagic);
  w.Int(kVersion);
  w.Word("dynamics");
  w.Line();
  w.Word("bounds");
  w.Real(m.bounds().lower);
  w.Real(m.bounds().upper);
  w.Line();
  w.Normalizer(m.input_normalizer());
  w.Normalizer(m.output_normalizer());
  w.Network(m.params());
  return w.str();
}

std::string SerializeModel(const EnergyModel& m) { return SerializeDensity(m, "energy"); }
std::string SerializeModel(const DenoiserModel& m) { return SerializeDensity(m, "denoiser"); }

void SaveModel(const std::string& path, const DynamicsModel& m) {
  WriteFile(path, SerializeModel(m));
}
void SaveModel(const std::string& path, const EnergyModel& m) {
  WriteFile(path, SerializeModel(m));
}
void SaveModel(const std::string& path, const DenoiserModel& m) {
  WriteFile(path, SerializeModel(m));
}

DynamicsModel ParseDynamicsModel(const std::string& text) {
  Parser p(text);
  CheckKind(p.Header(), "dynamics");
  p.Expect("bounds");
  LogVarianceBounds bounds;
  bounds.lower = p.Real();
  bounds.upper = p.Real();
  Normalizer in = p.Normalizer();
  Normalizer out = p.Normalizer();
  NetworkParams net = p.Network();
  return DynamicsModel(std::move(net), std::move(in), std::move(out), bounds);
}

EnergyModel ParseEnergyModel(const std::string& text) {
  Parser p(text);
  CheckKind(p.Header(), "energy");
  p.Expect("sigma");
  double sigma = p.Real();
  Normalizer n = p.Normalizer();
  return EnergyModel(p.Network(), std::move(n), sigma);
}

DenoiserModel ParseDenoiserModel(const std::string& text) {
  Parser p(text);
  CheckKind(p.Header(), "denoiser");
  p.Expect("sigma");
  double sigma = p.Real();
  Normalizer n = p.Normalizer();
  return DenoiserModel(p.Network(), std::move(n), sigma);
}

std::string ModelFileKind(const std::string& text) {
  Parser p(text);
  return p.Header();
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ebplan
