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

#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <vector>

#include "hreb/tensor.hpp"

namespace hreb {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Backward rule: receives the gradient flowing into the node's output and
// accumulates into its inputs through Tape::accumulate / Tape::grad_slot.
using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

// Linear record of operations. Records are appended in evaluation order, so
// every record's inputs precede it and a reverse sweep is a valid backward
// pass. One tape per thread; tapes are not synchronized.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Differentiable leaf owned by the tape.
  Var input(Tensor value);
  // Leaf bound to an external parameter tensor. Binding the same tensor twice
  // returns the same leaf, so its gradient is the total derivative.
  Var param(const Tensor& p);

  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  // Reverse sweep from a scalar loss. Interior gradients are recomputed on
  // every call; leaf gradients accumulate until zero_grad().
  void backward(Var loss);
  void zero_grad();

  const Tensor& value(int id) const { return nodes_.at(id).value; }
  // Gradient of a node, or an empty tensor when none reached it.
  const Tensor& grad(int id) const { return nodes_.at(id).grad; }
  // Gradient accumulated for a bound parameter; zeros if never bound.
  Tensor param_grad(const Tensor& p) const;
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const char* op_name(int id) const { return nodes_.at(id).op; }

  // Adds g into the gradient of node id (no-op for constants).
  void accumulate(int id, const Tensor& g);
  // Zero-initialized gradient buffer for in-place accumulation; only valid
  // when requires_grad(id).
  Tensor& grad_slot(int id);

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool leaf = false;
    BackwardFn backward;
  };

  Var push(Node node);

  bool grad_enabled_;
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, int> bound_;
};

namespace testing {
// Scales the gradient that matmul propagates into its left operand. 1.0 is the
// correct rule; anything else is a deliberately broken rule used to prove the
// finite-difference harness detects faults.
void set_matmul_grad_fault(double scale);
double matmul_grad_fault();
}  // namespace testing

}  // namespace hreb
