// Copyright 2026 The HREB-CRF Authors
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

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hreb/autograd.hpp"
#include "hreb/tensor.hpp"

namespace hreb {

// Named, ordered collection of trainable tensors. Names are dotted paths
// ("stage0.rhema.w_z"); iteration order is lexicographic and therefore
// stable across runs and checkpoint round-trips.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;
  std::size_t size() const noexcept { return params_.size(); }

  // Binds `name` on the tape (deduplicated per tensor).
  Var bind(Tape& tape, const std::string& name) const { return tape.param(at(name)); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Tensor> params_;
};

using GradMap = std::map<std::string, Tensor>;

// Gradients of every parameter in the store as accumulated on the tape.
GradMap collect_grads(const Tape& tape, const ParamStore& store);

// Platform-stable draws from a 64-bit Mersenne Twister. The standard
// distributions are implementation-defined, these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t next() { return engine_(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::mt19937_64 engine_;
};

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng);
// Glorot-uniform initialization for a fan_in × fan_out matrix.
Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::int64_t t = 0;
};

// One bias-corrected Adam update over every parameter that has a gradient.
// Throws kDivergence on a non-finite gradient before touching anything.
void adam_step(ParamStore& params, const GradMap& grads, AdamState& state);

// Rescales gradients in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(GradMap& grads, double max_norm);

}  // namespace hreb
