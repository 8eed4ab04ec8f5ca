#pragma once

#include <vector>

#include "patchprint/tensor.hpp"

namespace patchprint::ad {

// Adam with bias correction. step() consumes .grad of every registered
// tensor and zeroes it afterwards; a tensor with no accumulated gradient
// is an error, not a silent no-op.
template <typename S>
class Adam {
 public:
  explicit Adam(std::vector<TensorPtr<S>> params, S lr, S beta1 = S(0.9), S beta2 = S(0.999),
                S eps = S(1e-8));

  void step();
  void set_lr(S lr) { lr_ = lr; }
  S lr() const { return lr_; }
  std::int64_t steps() const { return t_; }

 private:
  std::vector<TensorPtr<S>> params_;
  std::vector<std::vector<S>> m_, v_;
  S lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace patchprint::ad
