#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

#include "patchprint/errors.hpp"

namespace patchprint::ad {

// Dense row-major tensor. `grad` is the persistent accumulator filled by
// Tape::backward for requires_grad tensors; `gbuf` is backward scratch owned
// by the tape (epoch-stamped so it never needs a global zeroing pass).
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> value;
  std::vector<S> grad;
  bool requires_grad = false;

  // internal to Tape
  std::vector<S> gbuf;
  std::uint64_t gbuf_epoch = 0;
  std::uint64_t grad_epoch = 0;
  bool on_grad_path = false;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
};

template <typename S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

template <typename S>
TensorPtr<S> make_tensor(std::vector<int> shape, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<S>>();
  t->shape = std::move(shape);
  t->value.assign(static_cast<size_t>(t->numel()), S(0));
  t->requires_grad = requires_grad;
  t->on_grad_path = requires_grad;
  return t;
}

template <typename S>
TensorPtr<S> make_tensor(std::vector<int> shape, std::vector<S> value, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<S>>();
  t->shape = std::move(shape);
  if (static_cast<std::int64_t>(value.size()) != t->numel())
    throw ShapeMismatch("make_tensor: value size does not match shape");
  t->value = std::move(value);
  t->requires_grad = requires_grad;
  t->on_grad_path = requires_grad;
  return t;
}

}  // namespace patchprint::ad
