#include "patchprint/adam.hpp"

#include <cmath>

#include "patchprint/errors.hpp"

namespace patchprint::ad {

template <typename S>
Adam<S>::Adam(std::vector<TensorPtr<S>> params, S lr, S beta1, S beta2, S eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->value.size(), S(0));
    v_.emplace_back(p->value.size(), S(0));
  }
}

template <typename S>
void Adam<S>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), static_cast<double>(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto& p = *params_[pi];
    if (p.grad.size() != p.value.size())
      throw MissingGradient("adam: parameter has no accumulated gradient");
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = static_cast<S>(beta1_ * m[i] + (S(1) - beta1_) * g);
      v[i] = static_cast<S>(beta2_ * v[i] + (S(1) - beta2_) * g * g);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= static_cast<S>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
    std::fill(p.grad.begin(), p.grad.end(), S(0));
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace patchprint::ad
