// Copyright 2026  The dsvae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsvae/error.hpp"
#include "dsvae/tensor.hpp"

namespace dsvae::ad {

enum class OpKind {
  kLeaf,
  kConstant,
  kMatmul,
  kTranspose,
  kConv2d,
  kConvTranspose2d,
  kUnary,
  kBinary,
  kReduce,
  kReshape,
  kAddBias,
  kConcat,
  kNormalizeRows,
  kCrossEntropy,
};

/// A trainable tensor that lives outside any tape. Backward accumulates
/// into `grad`; a parameter bound as a constant never receives gradient.
template <class T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;  // empty until the first backward that reaches it

  void zero_grad() {
    if (!grad.empty()) grad.fill(T(0));
  }
};

using Parameter = BasicParameter<float>;

template <class T>
class BasicTape;

/// Handle to a value recorded on a tape.
template <class T>
class BasicVar {
 public:
  BasicVar() = default;

  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  std::size_t id() const noexcept { return id_; }
  BasicTape<T>* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class BasicTape<T>;
  BasicVar(BasicTape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  BasicTape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Everything a backward rule may look at. `input_grads[k]` is null when
/// input k does not need a gradient; otherwise it is a zero-initialised (or
/// partially accumulated) buffer of the input's shape to add into.
template <class T>
struct BackwardContext {
  const BasicTensor<T>& grad_out;
  const BasicTensor<T>& out;
  std::span<const BasicTensor<T>* const> inputs;
  std::span<BasicTensor<T>* const> input_grads;
};

/// Append-only record of a forward computation. `backward` walks the nodes
/// in strict reverse creation order and may run once per tape; a second
/// call is a contract error.
template <class T>
class BasicTape {
 public:
  using Var = BasicVar<T>;
  using Tensor = BasicTensor<T>;
  using BackwardFn = std::function<void(const BackwardContext<T>&)>;

  explicit BasicTape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value) {
    return push(OpKind::kConstant, std::move(value), {}, false, nullptr, {});
  }

  /// A leaf that requires grad but is not bound to a parameter; its gradient
  /// is read back with grad().
  Var variable(Tensor value) {
    return push(OpKind::kLeaf, std::move(value), {}, grad_enabled_, nullptr,
                {});
  }

  /// Binds a parameter. Frozen parameters enter as constants.
  Var parameter(BasicParameter<T>& p, bool frozen = false) {
    if (frozen || !grad_enabled_) return constant(p.value);
    return push(OpKind::kLeaf, p.value, {}, true, &p, {});
  }

  /// Records the result of an operation. The backward rule is dropped when
  /// no input requires grad.
  Var record(OpKind kind, Tensor value, std::vector<Var> inputs,
             BackwardFn backward) {
    bool needs = false;
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const Var& v : inputs) {
      check_owner(v);
      ids.push_back(v.id());
      needs = needs || nodes_[v.id()].requires_grad;
    }
    needs = needs && grad_enabled_;
    return push(kind, std::move(value), std::move(ids), needs, nullptr,
                needs ? std::move(backward) : BackwardFn{});
  }

  const Tensor& value(const Var& v) const {
    check_owner(v);
    return nodes_[v.id()].value;
  }

  bool requires_grad(const Var& v) const {
    check_owner(v);
    return nodes_[v.id()].requires_grad;
  }

  OpKind kind(const Var& v) const {
    check_owner(v);
    return nodes_[v.id()].kind;
  }

  /// Gradient of the last backward's loss w.r.t. `v`; zeros when `v` was
  /// not on any path to the loss.
  Tensor grad(const Var& v) const {
    check_owner(v);
    const Node& n = nodes_[v.id()];
    if (n.grad.empty()) return Tensor(n.value.shape());
    return n.grad;
  }

  void backward(const Var& loss) {
    check_owner(loss);
    if (consumed_) {
      throw ContractError("backward called twice on the same tape");
    }
    Node& root = nodes_[loss.id()];
    if (root.value.numel() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " +
                          shape_str(root.value.shape()));
    }
    consumed_ = true;
    if (!root.requires_grad) return;
    root.grad = Tensor(root.value.shape(), T(1));

    std::vector<const Tensor*> in_values;
    std::vector<Tensor*> in_grads;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.param != nullptr) {
        accumulate(n.param->grad, n.grad);
      }
      if (!n.backward) continue;
      in_values.clear();
      in_grads.clear();
      for (std::size_t id : n.inputs) {
        Node& in = nodes_[id];
        in_values.push_back(&in.value);
        if (in.requires_grad) {
          if (in.grad.empty()) in.grad = Tensor(in.value.shape());
          in_grads.push_back(&in.grad);
        } else {
          in_grads.push_back(nullptr);
        }
      }
      n.backward(BackwardContext<T>{n.grad, n.value, in_values, in_grads});
      // Intermediate gradients are no longer needed once propagated.
      if (n.kind != OpKind::kLeaf) n.grad = Tensor();
    }
  }

 private:
  struct Node {
    OpKind kind;
    Tensor value;
    std::vector<std::size_t> inputs;
    bool requires_grad;
    BasicParameter<T>* param;
    BackwardFn backward;
    Tensor grad;
  };

  Var push(OpKind kind, Tensor value, std::vector<std::size_t> inputs,
           bool requires_grad, BasicParameter<T>* param, BackwardFn backward) {
    if (consumed_) {
      throw ContractError("cannot record on a tape after backward");
    }
    nodes_.push_back(Node{kind, std::move(value), std::move(inputs),
                          requires_grad, param, std::move(backward), Tensor()});
    return Var(this, nodes_.size() - 1);
  }

  void check_owner(const Var& v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
      throw ContractError("variable does not belong to this tape");
    }
  }

  static void accumulate(Tensor& dst, const Tensor& src) {
    if (dst.empty() || dst.shape() != src.shape()) {
      dst = src;
      return;
    }
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  }

  bool grad_enabled_;
  bool consumed_ = false;
  std::deque<Node> nodes_;
};

template <class T>
const BasicTensor<T>& BasicVar<T>::value() const {
  if (tape_ == nullptr) throw ContractError("unbound variable");
  return tape_->value(*this);
}

template <class T>
bool BasicVar<T>::requires_grad() const {
  if (tape_ == nullptr) throw ContractError("unbound variable");
  return tape_->requires_grad(*this);
}

using Tape = BasicTape<float>;
using Var = BasicVar<float>;

}  // namespace dsvae::ad
