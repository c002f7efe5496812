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

#include "hreb/autograd.hpp"

#include <atomic>

#include "hreb/error.hpp"

namespace hreb {

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) {
  return push(Node{"constant", std::move(value), {}, false, true, {}});
}

Var Tape::input(Tensor value) {
  return push(Node{"input", std::move(value), {}, grad_enabled_, true, {}});
}

Var Tape::param(const Tensor& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{this, it->second};
  Var v = push(Node{"param", p, {}, grad_enabled_, true, {}});
  bound_.emplace(&p, v.id);
  return v;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  return record(op, std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& inputs,
                 BackwardFn fn) {
  const int next_id = static_cast<int>(nodes_.size());
  if (!value.all_finite()) {
    fail(ErrorKind::kNumeric, std::string("op '") + op + "' produced a non-finite value (tensor id " +
                                  std::to_string(next_id) + ")");
  }
  bool needs = false;
  for (const Var& in : inputs) {
    require(in.tape == this, ErrorKind::kContract,
            std::string("op '") + op + "' mixes tapes");
    needs = needs || nodes_[in.id].requires_grad;
  }
  Node node{op, std::move(value), {}, needs, false, {}};
  if (needs) node.backward = std::move(fn);
  return push(std::move(node));
}

void Tape::accumulate(int id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
    return;
  }
  require(n.grad.size() == g.size(), ErrorKind::kDimension,
          std::string("gradient shape ") + shape_str(g.shape()) + " for node '" + n.op +
              "' of shape " + shape_str(n.value.shape()));
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor& Tape::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  require(loss.tape == this, ErrorKind::kContract, "backward: loss belongs to another tape");
  const Node& root = nodes_[loss.id];
  require(root.value.size() == 1, ErrorKind::kContract,
          "backward: loss must be a scalar, got shape " + shape_str(root.value.shape()));
  if (!root.requires_grad) return;

  for (Node& n : nodes_) {
    if (!n.leaf) n.grad = Tensor();
  }
  accumulate(loss.id, Tensor(root.value.shape(), 1.0));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.leaf || !n.backward || n.grad.size() == 0) continue;
    // The rule may append to other nodes' grads; n itself is never touched.
    const Tensor g = n.grad;
    n.backward(*this, g);
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Tensor();
}

Tensor Tape::param_grad(const Tensor& p) const {
  auto it = bound_.find(&p);
  if (it == bound_.end() || nodes_[it->second].grad.size() == 0) return Tensor(p.shape());
  return nodes_[it->second].grad;
}

namespace testing {

namespace {
std::atomic<double> g_matmul_fault{1.0};
}

void set_matmul_grad_fault(double scale) { g_matmul_fault.store(scale); }
double matmul_grad_fault() { return g_matmul_fault.load(); }

}  // namespace testing

}  // namespace hreb
