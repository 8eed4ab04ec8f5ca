#pragma once

#include <atomic>
#include <functional>
#include <vector>

#include "patchprint/tensor.hpp"

namespace patchprint::ad {

// Exponential-moving-average batch statistics, momentum 0.1:
// running = 0.9*running + 0.1*batch. Updated only in training mode.
template <typename S>
struct BatchNormState {
  std::vector<S> running_mean;
  std::vector<S> running_var;
  S momentum = S(0.1);

  BatchNormState() = default;
  explicit BatchNormState(int channels)
      : running_mean(channels, S(0)), running_var(channels, S(1)) {}
};

// Define-by-run reverse-mode tape. Ops executed while recording push one
// node each; backward() walks the nodes in reverse (execution order is
// already topological) and accumulates dLoss/dT into .grad of every
// requires_grad tensor. Repeated backward calls without zeroing add up, so
// two passes give exactly twice the one-pass gradient.
template <typename S>
class Tape {
 public:
  using P = TensorPtr<S>;

  bool recording() const { return recording_; }
  void set_recording(bool r) { recording_ = r; }

  // elementwise
  P add(const P& a, const P& b);
  P sub(const P& a, const P& b);
  P mul(const P& a, const P& b);
  P scale(const P& a, S s);
  P relu(const P& x);
  P sigmoid(const P& x);

  // linear algebra
  P matmul(const P& a, const P& b);     // [m,k]x[k,n]
  P matmul_nt(const P& a, const P& b);  // [m,k]x[n,k]^T -> [m,n]
  P linear(const P& x, const P& w, const P& b);  // [n,din]x[din,dout]+[dout]
  P softmax_rows(const P& x);           // [m,n], rows sum to 1

  // convolution stack; x is [N,C,H,W]
  P conv2d(const P& x, const P& w, const P& bias, int stride = 1, int pad = 0);
  P conv_transpose2d(const P& x, const P& w, const P& bias, int stride);  // w[Ci,Co,k,k], k==stride
  P maxpool2x2(const P& x);
  P global_avg_pool(const P& x);        // -> [N,C]
  P batch_norm(const P& x, const P& gamma, const P& beta, BatchNormState<S>& state,
               bool training);
  P concat_channels(const P& a, const P& b);
  P add_channel_bias(const P& x, const P& bias);  // x[N,C,H,W] + bias[N,C]

  // attention / fusion helpers
  P cross_attention(const P& q, const P& ctx, const P& wq, const P& wk, const P& wv);
  P l1_normalize_rows(const P& x);      // rows x/||x||_1, uniform fallback below 1e-8
  P repeat_row(const P& x, int row, int n);  // [R,d] -> [n,d] copies of one row

  // losses (scalar outputs, mean reductions)
  P bce_loss(const P& pred, const std::vector<S>& labels);
  P mse_loss(const P& a, const P& b);
  P sum(const P& x);

  void backward(const P& loss);
  void clear();
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    P out;
    std::vector<P> into;              // gradient recipients
    std::function<void()> backprop;   // reads out->gbuf, accumulates into `into`
  };

  void push(P out, std::vector<P> into, std::function<void()> fn);
  void ensure_gbuf(const P& t);

  std::vector<Node> nodes_;
  bool recording_ = true;
  // Epoch stamps deduplicate gbuf zeroing and grad settling within one
  // backward pass. They live on tensors, which outlive any single tape, so
  // the id must be unique across every backward of every tape in the
  // process; a per-tape counter would collide batch to batch and freeze
  // parameters after their first settle.
  std::uint64_t epoch_ = 0;
  static std::atomic<std::uint64_t> next_epoch_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace patchprint::ad
