#include "patchprint/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "patchprint/errors.hpp"
#include "patchprint/parallel.hpp"

namespace patchprint::ad {
namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBceLo = 1e-7;
constexpr double kBceHi = 1.0 - 1e-7;

// ---- small GEMM kernels ----
// Accumulating, fixed iteration order; the inner loops carry no float
// reductions across reordering, so results do not depend on tiling or
// thread count.

// C[M,N] += A[M,K] * B[K,N]
template <typename S>
void gemm_acc(const S* A, const S* B, S* C, int M, int K, int N) {
  constexpr int TN = 512;
  for (int n0 = 0; n0 < N; n0 += TN) {
    const int nl = std::min(TN, N - n0);
    for (int i = 0; i < M; ++i) {
      S* c = C + static_cast<size_t>(i) * N + n0;
      const S* arow = A + static_cast<size_t>(i) * K;
      for (int k = 0; k < K; ++k) {
        const S a = arow[k];
        if (a == S(0)) continue;
        const S* b = B + static_cast<size_t>(k) * N + n0;
        for (int j = 0; j < nl; ++j) c[j] += a * b[j];
      }
    }
  }
}

// C[K,N] += A^T * B with A[M,K], B[M,N]
template <typename S>
void gemm_tn_acc(const S* A, const S* B, S* C, int M, int K, int N) {
  constexpr int TN = 512;
  for (int n0 = 0; n0 < N; n0 += TN) {
    const int nl = std::min(TN, N - n0);
    for (int m = 0; m < M; ++m) {
      const S* arow = A + static_cast<size_t>(m) * K;
      const S* b = B + static_cast<size_t>(m) * N + n0;
      for (int k = 0; k < K; ++k) {
        const S a = arow[k];
        if (a == S(0)) continue;
        S* c = C + static_cast<size_t>(k) * N + n0;
        for (int j = 0; j < nl; ++j) c[j] += a * b[j];
      }
    }
  }
}

// C[M,N] += A * B^T with A[M,K], B[N,K]; eight-lane dot with a fixed
// combine order.
template <typename S>
void gemm_nt_acc(const S* A, const S* B, S* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const S* a = A + static_cast<size_t>(i) * K;
    for (int j = 0; j < N; ++j) {
      const S* b = B + static_cast<size_t>(j) * K;
      S acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
      int k = 0;
      for (; k + 4 <= K; k += 4) {
        acc0 += a[k] * b[k];
        acc1 += a[k + 1] * b[k + 1];
        acc2 += a[k + 2] * b[k + 2];
        acc3 += a[k + 3] * b[k + 3];
      }
      S acc = ((acc0 + acc1) + (acc2 + acc3));
      for (; k < K; ++k) acc += a[k] * b[k];
      C[static_cast<size_t>(i) * N + j] += acc;
    }
  }
}

template <typename S>
void im2col(const S* x, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho, int Wo,
            S* col) {
  for (int c = 0; c < C; ++c) {
    const S* plane = x + static_cast<size_t>(c) * H * W;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        S* row = col + (static_cast<size_t>(c) * kh * kw + ky * kw + kx) *
                           (static_cast<size_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          const int sy = oy * stride + ky - pad;
          S* dst = row + static_cast<size_t>(oy) * Wo;
          if (sy < 0 || sy >= H) {
            std::fill(dst, dst + Wo, S(0));
            continue;
          }
          const S* src = plane + static_cast<size_t>(sy) * W;
          if (stride == 1) {
            const int x0 = kx - pad;                       // source col of ox=0
            const int lo = std::max(0, -x0);               // first valid ox
            const int hi = std::min(Wo, W - x0);           // one past last valid
            if (lo > 0) std::fill(dst, dst + std::min(lo, Wo), S(0));
            if (hi > lo) std::memcpy(dst + lo, src + x0 + lo, sizeof(S) * (hi - lo));
            if (hi < Wo) std::fill(dst + std::max(hi, 0), dst + Wo, S(0));
          } else {
            for (int ox = 0; ox < Wo; ++ox) {
              const int sx = ox * stride + kx - pad;
              dst[ox] = (sx < 0 || sx >= W) ? S(0) : src[sx];
            }
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_acc(const S* col, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
                int Wo, S* x) {
  for (int c = 0; c < C; ++c) {
    S* plane = x + static_cast<size_t>(c) * H * W;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const S* row = col + (static_cast<size_t>(c) * kh * kw + ky * kw + kx) *
                                 (static_cast<size_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          const int sy = oy * stride + ky - pad;
          if (sy < 0 || sy >= H) continue;
          S* dstrow = plane + static_cast<size_t>(sy) * W;
          const S* srcrow = row + static_cast<size_t>(oy) * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int sx = ox * stride + kx - pad;
            if (sx >= 0 && sx < W) dstrow[sx] += srcrow[ox];
          }
        }
      }
    }
  }
}

template <typename S>
std::vector<S>& scratch_buffer(size_t n) {
  thread_local std::vector<S> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

void check(bool ok, const char* msg) {
  if (!ok) throw ShapeMismatch(msg);
}

}  // namespace

template <typename S>
void Tape<S>::push(P out, std::vector<P> into, std::function<void()> fn) {
  out->on_grad_path = true;
  nodes_.push_back(Node{std::move(out), std::move(into), std::move(fn)});
}

template <typename S>
void Tape<S>::ensure_gbuf(const P& t) {
  if (t->gbuf_epoch != epoch_) {
    t->gbuf.assign(t->value.size(), S(0));
    t->gbuf_epoch = epoch_;
  }
}

template <typename S>
void Tape<S>::clear() {
  nodes_.clear();
}

template <typename S>
void Tape<S>::backward(const P& loss) {
  if (loss->numel() != 1) throw NotScalar("backward: loss must be a scalar");
  epoch_ = next_epoch_.fetch_add(1, std::memory_order_relaxed) + 1;
  ensure_gbuf(loss);
  loss->gbuf[0] = S(1);

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out->gbuf_epoch != epoch_) continue;  // nothing flowed into this subgraph
    it->backprop();
    std::vector<S>().swap(it->out->gbuf);  // producer consumed it; free eagerly
    it->out->gbuf_epoch = 0;
  }

  auto settle = [&](const P& t) {
    if (!t->requires_grad || t->gbuf_epoch != epoch_ || t->grad_epoch == epoch_) return;
    t->ensure_grad();
    for (size_t i = 0; i < t->grad.size(); ++i) t->grad[i] += t->gbuf[i];
    t->grad_epoch = epoch_;
    std::vector<S>().swap(t->gbuf);
    t->gbuf_epoch = 0;
  };
  for (auto& n : nodes_)
    for (auto& t : n.into) settle(t);
  settle(loss);
}

// ---- elementwise ----

template <typename S>
typename Tape<S>::P Tape<S>::add(const P& a, const P& b) {
  check(a->shape == b->shape, "add: shape mismatch");
  auto out = make_tensor<S>(a->shape);
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = a->value[i] + b->value[i];
  if (recording_ && (a->on_grad_path || b->on_grad_path))
    push(out, {a, b}, [this, a, b, out] {
      ensure_gbuf(a);
      ensure_gbuf(b);
      for (size_t i = 0; i < out->gbuf.size(); ++i) {
        a->gbuf[i] += out->gbuf[i];
        b->gbuf[i] += out->gbuf[i];
      }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::sub(const P& a, const P& b) {
  check(a->shape == b->shape, "sub: shape mismatch");
  auto out = make_tensor<S>(a->shape);
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = a->value[i] - b->value[i];
  if (recording_ && (a->on_grad_path || b->on_grad_path))
    push(out, {a, b}, [this, a, b, out] {
      ensure_gbuf(a);
      ensure_gbuf(b);
      for (size_t i = 0; i < out->gbuf.size(); ++i) {
        a->gbuf[i] += out->gbuf[i];
        b->gbuf[i] -= out->gbuf[i];
      }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::mul(const P& a, const P& b) {
  check(a->shape == b->shape, "mul: shape mismatch");
  auto out = make_tensor<S>(a->shape);
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = a->value[i] * b->value[i];
  if (recording_ && (a->on_grad_path || b->on_grad_path))
    push(out, {a, b}, [this, a, b, out] {
      ensure_gbuf(a);
      ensure_gbuf(b);
      for (size_t i = 0; i < out->gbuf.size(); ++i) {
        a->gbuf[i] += out->gbuf[i] * b->value[i];
        b->gbuf[i] += out->gbuf[i] * a->value[i];
      }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::scale(const P& a, S s) {
  auto out = make_tensor<S>(a->shape);
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = a->value[i] * s;
  if (recording_ && a->on_grad_path)
    push(out, {a}, [this, a, out, s] {
      ensure_gbuf(a);
      for (size_t i = 0; i < out->gbuf.size(); ++i) a->gbuf[i] += out->gbuf[i] * s;
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::relu(const P& x) {
  auto out = make_tensor<S>(x->shape);
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = x->value[i] > S(0) ? x->value[i] : S(0);
  if (recording_ && x->on_grad_path)
    push(out, {x}, [this, x, out] {
      ensure_gbuf(x);
      for (size_t i = 0; i < out->gbuf.size(); ++i)
        if (out->value[i] > S(0)) x->gbuf[i] += out->gbuf[i];
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::sigmoid(const P& x) {
  auto out = make_tensor<S>(x->shape);
  for (size_t i = 0; i < out->value.size(); ++i) {
    const double v = static_cast<double>(x->value[i]);
    const double y = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    out->value[i] = static_cast<S>(y);
  }
  if (recording_ && x->on_grad_path)
    push(out, {x}, [this, x, out] {
      ensure_gbuf(x);
      for (size_t i = 0; i < out->gbuf.size(); ++i) {
        const S y = out->value[i];
        x->gbuf[i] += out->gbuf[i] * y * (S(1) - y);
      }
    });
  return out;
}

// ---- linear algebra ----

template <typename S>
typename Tape<S>::P Tape<S>::matmul(const P& a, const P& b) {
  check(a->rank() == 2 && b->rank() == 2 && a->dim(1) == b->dim(0), "matmul: bad shapes");
  const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
  auto out = make_tensor<S>({m, n});
  gemm_acc(a->value.data(), b->value.data(), out->value.data(), m, k, n);
  if (recording_ && (a->on_grad_path || b->on_grad_path))
    push(out, {a, b}, [this, a, b, out, m, k, n] {
      ensure_gbuf(a);
      ensure_gbuf(b);
      gemm_nt_acc(out->gbuf.data(), b->value.data(), a->gbuf.data(), m, n, k);
      gemm_tn_acc(a->value.data(), out->gbuf.data(), b->gbuf.data(), m, k, n);
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::matmul_nt(const P& a, const P& b) {
  check(a->rank() == 2 && b->rank() == 2 && a->dim(1) == b->dim(1), "matmul_nt: bad shapes");
  const int m = a->dim(0), k = a->dim(1), n = b->dim(0);
  auto out = make_tensor<S>({m, n});
  gemm_nt_acc(a->value.data(), b->value.data(), out->value.data(), m, k, n);
  if (recording_ && (a->on_grad_path || b->on_grad_path))
    push(out, {a, b}, [this, a, b, out, m, k, n] {
      ensure_gbuf(a);
      ensure_gbuf(b);
      gemm_acc(out->gbuf.data(), b->value.data(), a->gbuf.data(), m, n, k);
      gemm_tn_acc(out->gbuf.data(), a->value.data(), b->gbuf.data(), m, n, k);
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::linear(const P& x, const P& w, const P& b) {
  check(x->rank() == 2 && w->rank() == 2 && x->dim(1) == w->dim(0), "linear: bad shapes");
  check(b->rank() == 1 && b->dim(0) == w->dim(1), "linear: bad bias");
  const int n = x->dim(0), din = x->dim(1), dout = w->dim(1);
  auto out = make_tensor<S>({n, dout});
  for (int i = 0; i < n; ++i)
    std::copy(b->value.begin(), b->value.end(), out->value.begin() + static_cast<size_t>(i) * dout);
  gemm_acc(x->value.data(), w->value.data(), out->value.data(), n, din, dout);
  if (recording_ && (x->on_grad_path || w->on_grad_path || b->on_grad_path))
    push(out, {x, w, b}, [this, x, w, b, out, n, din, dout] {
      ensure_gbuf(x);
      ensure_gbuf(w);
      ensure_gbuf(b);
      gemm_nt_acc(out->gbuf.data(), w->value.data(), x->gbuf.data(), n, dout, din);
      gemm_tn_acc(x->value.data(), out->gbuf.data(), w->gbuf.data(), n, din, dout);
      for (int j = 0; j < dout; ++j) {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += out->gbuf[static_cast<size_t>(i) * dout + j];
        b->gbuf[j] += static_cast<S>(acc);
      }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::softmax_rows(const P& x) {
  check(x->rank() == 2, "softmax_rows: expected [m,n]");
  const int m = x->dim(0), n = x->dim(1);
  auto out = make_tensor<S>(x->shape);
  for (int i = 0; i < m; ++i) {
    const S* row = &x->value[static_cast<size_t>(i) * n];
    S* orow = &out->value[static_cast<size_t>(i) * n];
    S mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0;
    for (int j = 0; j < n; ++j) {
      const double e = std::exp(static_cast<double>(row[j] - mx));
      orow[j] = static_cast<S>(e);
      sum += e;
    }
    for (int j = 0; j < n; ++j) orow[j] = static_cast<S>(orow[j] / sum);
  }
  if (recording_ && x->on_grad_path)
    push(out, {x}, [this, x, out, m, n] {
      ensure_gbuf(x);
      for (int i = 0; i < m; ++i) {
        const S* y = &out->value[static_cast<size_t>(i) * n];
        const S* dy = &out->gbuf[static_cast<size_t>(i) * n];
        S* dx = &x->gbuf[static_cast<size_t>(i) * n];
        double dot = 0;
        for (int j = 0; j < n; ++j) dot += static_cast<double>(dy[j]) * y[j];
        for (int j = 0; j < n; ++j) dx[j] += (dy[j] - static_cast<S>(dot)) * y[j];
      }
    });
  return out;
}

// ---- convolution stack ----

template <typename S>
typename Tape<S>::P Tape<S>::conv2d(const P& x, const P& w, const P& bias, int stride, int pad) {
  check(x->rank() == 4 && w->rank() == 4, "conv2d: expected 4-d input and weight");
  check(x->dim(1) == w->dim(1), "conv2d: channel mismatch");
  check(bias->rank() == 1 && bias->dim(0) == w->dim(0), "conv2d: bad bias");
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int Co = w->dim(0), kh = w->dim(2), kw = w->dim(3);
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  check(Ho > 0 && Wo > 0, "conv2d: kernel larger than padded input");

  auto out = make_tensor<S>({N, Co, Ho, Wo});
  const size_t K = static_cast<size_t>(C) * kh * kw;
  const size_t ohw = static_cast<size_t>(Ho) * Wo;
  const size_t in_sz = static_cast<size_t>(C) * H * W;
  const size_t out_sz = static_cast<size_t>(Co) * ohw;

  parallel_for(N, [&](std::int64_t lo, std::int64_t hi) {
    auto& col = scratch_buffer<S>(K * ohw);
    for (std::int64_t n = lo; n < hi; ++n) {
      im2col(x->value.data() + n * in_sz, C, H, W, kh, kw, stride, pad, Ho, Wo, col.data());
      S* o = out->value.data() + n * out_sz;
      for (int co = 0; co < Co; ++co)
        std::fill(o + co * ohw, o + (co + 1) * ohw, bias->value[co]);
      gemm_acc(w->value.data(), col.data(), o, Co, static_cast<int>(K), static_cast<int>(ohw));
    }
  });

  if (recording_ && (x->on_grad_path || w->on_grad_path || bias->on_grad_path)) {
    push(out, {x, w, bias},
         [this, x, w, bias, out, N, C, H, W, Co, kh, kw, stride, pad, Ho, Wo, K, ohw, in_sz,
          out_sz] {
           ensure_gbuf(x);
           ensure_gbuf(w);
           ensure_gbuf(bias);
           const size_t wsz = w->value.size();
           std::vector<S> dw_per(static_cast<size_t>(N) * wsz, S(0));
           std::vector<double> db_per(static_cast<size_t>(N) * Co, 0.0);
           parallel_for(N, [&](std::int64_t lo, std::int64_t hi) {
             auto& col = scratch_buffer<S>(2 * K * ohw);
             S* colbuf = col.data();
             S* dcol = col.data() + K * ohw;
             for (std::int64_t n = lo; n < hi; ++n) {
               const S* dy = out->gbuf.data() + n * out_sz;
               // input gradient
               std::fill(dcol, dcol + K * ohw, S(0));
               gemm_tn_acc(w->value.data(), dy, dcol, Co, static_cast<int>(K),
                           static_cast<int>(ohw));
               col2im_acc(dcol, C, H, W, kh, kw, stride, pad, Ho, Wo,
                          x->gbuf.data() + n * in_sz);
               // weight gradient, per sample for an order independent of threading
               im2col(x->value.data() + n * in_sz, C, H, W, kh, kw, stride, pad, Ho, Wo, colbuf);
               gemm_nt_acc(dy, colbuf, dw_per.data() + n * wsz, Co, static_cast<int>(ohw),
                           static_cast<int>(K));
               for (int co = 0; co < Co; ++co) {
                 double acc = 0;
                 const S* dyrow = dy + co * ohw;
                 for (size_t q = 0; q < ohw; ++q) acc += dyrow[q];
                 db_per[n * Co + co] = acc;
               }
             }
           });
           for (int n = 0; n < N; ++n) {
             const S* src = dw_per.data() + static_cast<size_t>(n) * wsz;
             for (size_t i = 0; i < wsz; ++i) w->gbuf[i] += src[i];
             for (int co = 0; co < Co; ++co)
               bias->gbuf[co] += static_cast<S>(db_per[static_cast<size_t>(n) * Co + co]);
           }
         });
  }
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::conv_transpose2d(const P& x, const P& w, const P& bias, int stride) {
  check(x->rank() == 4 && w->rank() == 4, "conv_transpose2d: expected 4-d input and weight");
  check(x->dim(1) == w->dim(0), "conv_transpose2d: channel mismatch");
  const int k = w->dim(2);
  check(k == w->dim(3) && k == stride, "conv_transpose2d: kernel must equal stride");
  const int N = x->dim(0), Ci = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int Co = w->dim(1);
  check(bias->rank() == 1 && bias->dim(0) == Co, "conv_transpose2d: bad bias");
  const int Ho = H * stride, Wo = W * stride;

  auto out = make_tensor<S>({N, Co, Ho, Wo});
  const size_t in_sz = static_cast<size_t>(Ci) * H * W;
  const size_t out_sz = static_cast<size_t>(Co) * Ho * Wo;

  // k == stride means every output pixel is fed by exactly one input pixel.
  parallel_for(N, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t n = lo; n < hi; ++n) {
      const S* xin = x->value.data() + n * in_sz;
      S* o = out->value.data() + n * out_sz;
      for (int co = 0; co < Co; ++co) {
        S* oplane = o + static_cast<size_t>(co) * Ho * Wo;
        for (int y = 0; y < Ho; ++y) {
          const int i = y / stride, di = y % stride;
          S* orow = oplane + static_cast<size_t>(y) * Wo;
          for (int xo = 0; xo < Wo; ++xo) {
            const int j = xo / stride, dj = xo % stride;
            S acc = bias->value[co];
            for (int ci = 0; ci < Ci; ++ci)
              acc += xin[(static_cast<size_t>(ci) * H + i) * W + j] *
                     w->value[((static_cast<size_t>(ci) * Co + co) * k + di) * k + dj];
            orow[xo] = acc;
          }
        }
      }
    }
  });

  if (recording_ && (x->on_grad_path || w->on_grad_path || bias->on_grad_path)) {
    push(out, {x, w, bias},
         [this, x, w, bias, out, N, Ci, Co, H, W, Ho, Wo, k, stride, in_sz, out_sz] {
           ensure_gbuf(x);
           ensure_gbuf(w);
           ensure_gbuf(bias);
           const size_t wsz = w->value.size();
           std::vector<S> dw_per(static_cast<size_t>(N) * wsz, S(0));
           std::vector<double> db_per(static_cast<size_t>(N) * Co, 0.0);
           parallel_for(N, [&](std::int64_t lo, std::int64_t hi) {
             for (std::int64_t n = lo; n < hi; ++n) {
               const S* dy = out->gbuf.data() + n * out_sz;
               const S* xin = x->value.data() + n * in_sz;
               S* dx = x->gbuf.data() + n * in_sz;
               S* dwn = dw_per.data() + n * wsz;
               for (int co = 0; co < Co; ++co) {
                 const S* dyp = dy + static_cast<size_t>(co) * Ho * Wo;
                 double acc = 0;
                 for (size_t q = 0; q < static_cast<size_t>(Ho) * Wo; ++q) acc += dyp[q];
                 db_per[n * Co + co] = acc;
               }
               for (int ci = 0; ci < Ci; ++ci)
                 for (int i = 0; i < H; ++i)
                   for (int j = 0; j < W; ++j) {
                     const S xv = xin[(static_cast<size_t>(ci) * H + i) * W + j];
                     S g = 0;
                     for (int co = 0; co < Co; ++co)
                       for (int di = 0; di < k; ++di)
                         for (int dj = 0; dj < k; ++dj) {
                           const S dyv = dy[((static_cast<size_t>(co) * Ho) + i * stride + di) * Wo +
                                            j * stride + dj];
                           g += dyv * w->value[((static_cast<size_t>(ci) * Co + co) * k + di) * k + dj];
                           dwn[((static_cast<size_t>(ci) * Co + co) * k + di) * k + dj] += xv * dyv;
                         }
                     dx[(static_cast<size_t>(ci) * H + i) * W + j] += g;
                   }
             }
           });
           for (int n = 0; n < N; ++n) {
             const S* src = dw_per.data() + static_cast<size_t>(n) * wsz;
             for (size_t i = 0; i < wsz; ++i) w->gbuf[i] += src[i];
             for (int co = 0; co < Co; ++co)
               bias->gbuf[co] += static_cast<S>(db_per[static_cast<size_t>(n) * Co + co]);
           }
         });
  }
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::maxpool2x2(const P& x) {
  check(x->rank() == 4, "maxpool2x2: expected [N,C,H,W]");
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  check(H % 2 == 0 && W % 2 == 0, "maxpool2x2: odd spatial size");
  const int Ho = H / 2, Wo = W / 2;
  auto out = make_tensor<S>({N, C, Ho, Wo});
  auto idx = std::make_shared<std::vector<unsigned char>>(out->value.size());

  const size_t planes = static_cast<size_t>(N) * C;
  parallel_for(static_cast<std::int64_t>(planes), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t p = lo; p < hi; ++p) {
      const S* in = x->value.data() + p * H * W;
      S* o = out->value.data() + p * Ho * Wo;
      unsigned char* id = idx->data() + p * Ho * Wo;
      for (int y = 0; y < Ho; ++y)
        for (int xo = 0; xo < Wo; ++xo) {
          const S* base = in + static_cast<size_t>(2 * y) * W + 2 * xo;
          const S v[4] = {base[0], base[1], base[W], base[W + 1]};
          int best = 0;
          for (int t = 1; t < 4; ++t)
            if (v[t] > v[best]) best = t;  // ties keep the first position
          o[static_cast<size_t>(y) * Wo + xo] = v[best];
          id[static_cast<size_t>(y) * Wo + xo] = static_cast<unsigned char>(best);
        }
    }
  });

  if (recording_ && x->on_grad_path)
    push(out, {x}, [this, x, out, idx, N, C, H, W, Ho, Wo] {
      ensure_gbuf(x);
      const size_t planes = static_cast<size_t>(N) * C;
      for (size_t p = 0; p < planes; ++p) {
        S* dx = x->gbuf.data() + p * H * W;
        const S* dy = out->gbuf.data() + p * Ho * Wo;
        const unsigned char* id = idx->data() + p * Ho * Wo;
        for (int y = 0; y < Ho; ++y)
          for (int xo = 0; xo < Wo; ++xo) {
            const int t = id[static_cast<size_t>(y) * Wo + xo];
            const int sy = 2 * y + t / 2, sx = 2 * xo + t % 2;
            dx[static_cast<size_t>(sy) * W + sx] += dy[static_cast<size_t>(y) * Wo + xo];
          }
      }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::global_avg_pool(const P& x) {
  check(x->rank() == 4, "global_avg_pool: expected [N,C,H,W]");
  const int N = x->dim(0), C = x->dim(1);
  const size_t hw = static_cast<size_t>(x->dim(2)) * x->dim(3);
  auto out = make_tensor<S>({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S* plane = x->value.data() + (static_cast<size_t>(n) * C + c) * hw;
      double acc = 0;
      for (size_t i = 0; i < hw; ++i) acc += plane[i];
      out->value[static_cast<size_t>(n) * C + c] = static_cast<S>(acc / static_cast<double>(hw));
    }
  if (recording_ && x->on_grad_path)
    push(out, {x}, [this, x, out, N, C, hw] {
      ensure_gbuf(x);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const S g = out->gbuf[static_cast<size_t>(n) * C + c] / static_cast<S>(hw);
          S* dp = x->gbuf.data() + (static_cast<size_t>(n) * C + c) * hw;
          for (size_t i = 0; i < hw; ++i) dp[i] += g;
        }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::batch_norm(const P& x, const P& gamma, const P& beta,
                                        BatchNormState<S>& state, bool training) {
  check(x->rank() == 4, "batch_norm: expected [N,C,H,W]");
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  check(gamma->rank() == 1 && gamma->dim(0) == C && beta->rank() == 1 && beta->dim(0) == C,
        "batch_norm: bad affine shapes");
  check(static_cast<int>(state.running_mean.size()) == C, "batch_norm: bad state size");

  const size_t hw = static_cast<size_t>(H) * W;
  const size_t csz = hw;  // per (n,c) plane
  const double m = static_cast<double>(N) * H * W;
  auto out = make_tensor<S>(x->shape);

  auto mean = std::make_shared<std::vector<S>>(C);
  auto invstd = std::make_shared<std::vector<S>>(C);

  if (training) {
    parallel_for(C, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t c = lo; c < hi; ++c) {
        double sum = 0;
        for (int n = 0; n < N; ++n) {
          const S* p = x->value.data() + (static_cast<size_t>(n) * C + c) * csz;
          for (size_t i = 0; i < hw; ++i) sum += p[i];
        }
        const double mu = sum / m;
        double var = 0;
        for (int n = 0; n < N; ++n) {
          const S* p = x->value.data() + (static_cast<size_t>(n) * C + c) * csz;
          for (size_t i = 0; i < hw; ++i) {
            const double d = p[i] - mu;
            var += d * d;
          }
        }
        var /= m;
        (*mean)[c] = static_cast<S>(mu);
        (*invstd)[c] = static_cast<S>(1.0 / std::sqrt(var + kBnEps));
        state.running_mean[c] =
            static_cast<S>((1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu);
        state.running_var[c] =
            static_cast<S>((1.0 - state.momentum) * state.running_var[c] + state.momentum * var);
      }
    });
  } else {
    for (int c = 0; c < C; ++c) {
      (*mean)[c] = state.running_mean[c];
      (*invstd)[c] = static_cast<S>(1.0 / std::sqrt(static_cast<double>(state.running_var[c]) + kBnEps));
    }
  }

  parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t nc = lo; nc < hi; ++nc) {
      const int c = static_cast<int>(nc % C);
      const S* p = x->value.data() + nc * csz;
      S* o = out->value.data() + nc * csz;
      const S mu = (*mean)[c], is = (*invstd)[c], g = gamma->value[c], b = beta->value[c];
      for (size_t i = 0; i < hw; ++i) o[i] = (p[i] - mu) * is * g + b;
    }
  });

  if (recording_ && (x->on_grad_path || gamma->on_grad_path || beta->on_grad_path)) {
    push(out, {x, gamma, beta},
         [this, x, gamma, beta, out, mean, invstd, N, C, hw, csz, m, training] {
           ensure_gbuf(x);
           ensure_gbuf(gamma);
           ensure_gbuf(beta);
           // per channel: dbeta = sum dy, dgamma = sum dy*xhat
           for (int c = 0; c < C; ++c) {
             const S mu = (*mean)[c], is = (*invstd)[c], g = gamma->value[c];
             double sdy = 0, sdyx = 0;
             for (int n = 0; n < N; ++n) {
               const size_t off = (static_cast<size_t>(n) * C + c) * csz;
               const S* dy = out->gbuf.data() + off;
               const S* xv = x->value.data() + off;
               for (size_t i = 0; i < hw; ++i) {
                 sdy += dy[i];
                 sdyx += static_cast<double>(dy[i]) * ((xv[i] - mu) * is);
               }
             }
             gamma->gbuf[c] += static_cast<S>(sdyx);
             beta->gbuf[c] += static_cast<S>(sdy);
             const double k1 = training ? sdy / m : 0.0;
             const double k2 = training ? sdyx / m : 0.0;
             for (int n = 0; n < N; ++n) {
               const size_t off = (static_cast<size_t>(n) * C + c) * csz;
               const S* dy = out->gbuf.data() + off;
               const S* xv = x->value.data() + off;
               S* dx = x->gbuf.data() + off;
               for (size_t i = 0; i < hw; ++i) {
                 const double xhat = (xv[i] - mu) * is;
                 dx[i] += static_cast<S>(g * is * (dy[i] - k1 - xhat * k2));
               }
             }
           }
         });
  }
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::concat_channels(const P& a, const P& b) {
  check(a->rank() == 4 && b->rank() == 4, "concat_channels: expected [N,C,H,W]");
  check(a->dim(0) == b->dim(0) && a->dim(2) == b->dim(2) && a->dim(3) == b->dim(3),
        "concat_channels: mismatched dims");
  const int N = a->dim(0), Ca = a->dim(1), Cb = b->dim(1), H = a->dim(2), W = a->dim(3);
  const size_t hw = static_cast<size_t>(H) * W;
  auto out = make_tensor<S>({N, Ca + Cb, H, W});
  for (int n = 0; n < N; ++n) {
    std::copy(a->value.begin() + static_cast<size_t>(n) * Ca * hw,
              a->value.begin() + static_cast<size_t>(n + 1) * Ca * hw,
              out->value.begin() + static_cast<size_t>(n) * (Ca + Cb) * hw);
    std::copy(b->value.begin() + static_cast<size_t>(n) * Cb * hw,
              b->value.begin() + static_cast<size_t>(n + 1) * Cb * hw,
              out->value.begin() + static_cast<size_t>(n) * (Ca + Cb) * hw + Ca * hw);
  }
  if (recording_ && (a->on_grad_path || b->on_grad_path))
    push(out, {a, b}, [this, a, b, out, N, Ca, Cb, hw] {
      ensure_gbuf(a);
      ensure_gbuf(b);
      for (int n = 0; n < N; ++n) {
        const S* dy = out->gbuf.data() + static_cast<size_t>(n) * (Ca + Cb) * hw;
        S* da = a->gbuf.data() + static_cast<size_t>(n) * Ca * hw;
        S* db = b->gbuf.data() + static_cast<size_t>(n) * Cb * hw;
        for (size_t i = 0; i < Ca * hw; ++i) da[i] += dy[i];
        for (size_t i = 0; i < Cb * hw; ++i) db[i] += dy[Ca * hw + i];
      }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::add_channel_bias(const P& x, const P& bias) {
  check(x->rank() == 4 && bias->rank() == 2, "add_channel_bias: expected [N,C,H,W] and [N,C]");
  check(x->dim(0) == bias->dim(0) && x->dim(1) == bias->dim(1), "add_channel_bias: bad shapes");
  const int N = x->dim(0), C = x->dim(1);
  const size_t hw = static_cast<size_t>(x->dim(2)) * x->dim(3);
  auto out = make_tensor<S>(x->shape);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S bv = bias->value[static_cast<size_t>(n) * C + c];
      const S* p = x->value.data() + (static_cast<size_t>(n) * C + c) * hw;
      S* o = out->value.data() + (static_cast<size_t>(n) * C + c) * hw;
      for (size_t i = 0; i < hw; ++i) o[i] = p[i] + bv;
    }
  if (recording_ && (x->on_grad_path || bias->on_grad_path))
    push(out, {x, bias}, [this, x, bias, out, N, C, hw] {
      ensure_gbuf(x);
      ensure_gbuf(bias);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const S* dy = out->gbuf.data() + (static_cast<size_t>(n) * C + c) * hw;
          S* dx = x->gbuf.data() + (static_cast<size_t>(n) * C + c) * hw;
          double acc = 0;
          for (size_t i = 0; i < hw; ++i) {
            dx[i] += dy[i];
            acc += dy[i];
          }
          bias->gbuf[static_cast<size_t>(n) * C + c] += static_cast<S>(acc);
        }
    });
  return out;
}

// ---- attention / fusion ----

template <typename S>
typename Tape<S>::P Tape<S>::cross_attention(const P& q, const P& ctx, const P& wq, const P& wk,
                                             const P& wv) {
  check(q->rank() == 2 && ctx->rank() == 2, "cross_attention: expected 2-d query/context");
  check(q->dim(1) == wq->dim(0) && ctx->dim(1) == wk->dim(0) && ctx->dim(1) == wv->dim(0),
        "cross_attention: dim mismatch");
  const int d = wq->dim(1);
  auto qp = matmul(q, wq);
  auto kp = matmul(ctx, wk);
  auto vp = matmul(ctx, wv);
  auto scores = scale(matmul_nt(qp, kp), static_cast<S>(1.0 / std::sqrt(static_cast<double>(d))));
  auto attn = softmax_rows(scores);
  return matmul(attn, vp);
}

template <typename S>
typename Tape<S>::P Tape<S>::l1_normalize_rows(const P& x) {
  check(x->rank() == 2, "l1_normalize_rows: expected [n,k]");
  const int n = x->dim(0), k = x->dim(1);
  auto out = make_tensor<S>(x->shape);
  auto sums = std::make_shared<std::vector<double>>(n);
  for (int i = 0; i < n; ++i) {
    const S* row = &x->value[static_cast<size_t>(i) * k];
    double s = 0;
    for (int j = 0; j < k; ++j) s += std::abs(static_cast<double>(row[j]));
    (*sums)[i] = s;
    S* orow = &out->value[static_cast<size_t>(i) * k];
    if (s < 1e-8) {
      for (int j = 0; j < k; ++j) orow[j] = static_cast<S>(1.0 / k);
    } else {
      for (int j = 0; j < k; ++j) orow[j] = static_cast<S>(row[j] / s);
    }
  }
  if (recording_ && x->on_grad_path)
    push(out, {x}, [this, x, out, sums, n, k] {
      ensure_gbuf(x);
      for (int i = 0; i < n; ++i) {
        const double s = (*sums)[i];
        if (s < 1e-8) continue;  // uniform fallback is locally constant
        const S* y = &out->value[static_cast<size_t>(i) * k];
        const S* dy = &out->gbuf[static_cast<size_t>(i) * k];
        const S* xv = &x->value[static_cast<size_t>(i) * k];
        S* dx = &x->gbuf[static_cast<size_t>(i) * k];
        double dot = 0;
        for (int j = 0; j < k; ++j) dot += static_cast<double>(dy[j]) * y[j];
        for (int j = 0; j < k; ++j) {
          const double sgn = xv[j] > 0 ? 1.0 : (xv[j] < 0 ? -1.0 : 0.0);
          dx[j] += static_cast<S>((dy[j] - sgn * dot) / s);
        }
      }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::repeat_row(const P& x, int row, int n) {
  check(x->rank() == 2 && row >= 0 && row < x->dim(0), "repeat_row: bad row");
  const int d = x->dim(1);
  auto out = make_tensor<S>({n, d});
  for (int i = 0; i < n; ++i)
    std::copy(x->value.begin() + static_cast<size_t>(row) * d,
              x->value.begin() + static_cast<size_t>(row + 1) * d,
              out->value.begin() + static_cast<size_t>(i) * d);
  if (recording_ && x->on_grad_path)
    push(out, {x}, [this, x, out, row, n, d] {
      ensure_gbuf(x);
      for (int j = 0; j < d; ++j) {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += out->gbuf[static_cast<size_t>(i) * d + j];
        x->gbuf[static_cast<size_t>(row) * d + j] += static_cast<S>(acc);
      }
    });
  return out;
}

// ---- losses ----

template <typename S>
typename Tape<S>::P Tape<S>::bce_loss(const P& pred, const std::vector<S>& labels) {
  const std::int64_t n = pred->numel();
  check(static_cast<std::int64_t>(labels.size()) == n, "bce_loss: label count mismatch");
  auto out = make_tensor<S>(std::vector<int>{1});
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = std::clamp(static_cast<double>(pred->value[i]), kBceLo, kBceHi);
    const double y = labels[i];
    acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  out->value[0] = static_cast<S>(acc / static_cast<double>(n));
  if (recording_ && pred->on_grad_path) {
    auto lab = std::make_shared<std::vector<S>>(labels);
    push(out, {pred}, [this, pred, out, lab, n] {
      ensure_gbuf(pred);
      const S go = out->gbuf[0];
      for (std::int64_t i = 0; i < n; ++i) {
        const double praw = pred->value[i];
        if (praw < kBceLo || praw > kBceHi) continue;  // clamped: zero slope
        const double y = (*lab)[i];
        const double d = (-y / praw + (1.0 - y) / (1.0 - praw)) / static_cast<double>(n);
        pred->gbuf[i] += static_cast<S>(go * d);
      }
    });
  }
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::mse_loss(const P& a, const P& b) {
  check(a->shape == b->shape, "mse_loss: shape mismatch");
  const std::int64_t n = a->numel();
  auto out = make_tensor<S>(std::vector<int>{1});
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a->value[i]) - b->value[i];
    acc += d * d;
  }
  out->value[0] = static_cast<S>(acc / static_cast<double>(n));
  if (recording_ && (a->on_grad_path || b->on_grad_path))
    push(out, {a, b}, [this, a, b, out, n] {
      ensure_gbuf(a);
      ensure_gbuf(b);
      const S go = out->gbuf[0];
      const S two_over_n = static_cast<S>(2.0 / static_cast<double>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        const S d = (a->value[i] - b->value[i]) * two_over_n * go;
        a->gbuf[i] += d;
        b->gbuf[i] -= d;
      }
    });
  return out;
}

template <typename S>
typename Tape<S>::P Tape<S>::sum(const P& x) {
  auto out = make_tensor<S>(std::vector<int>{1});
  double acc = 0;
  for (const S v : x->value) acc += v;
  out->value[0] = static_cast<S>(acc);
  if (recording_ && x->on_grad_path)
    push(out, {x}, [this, x, out] {
      ensure_gbuf(x);
      const S go = out->gbuf[0];
      for (size_t i = 0; i < x->gbuf.size(); ++i) x->gbuf[i] += go;
    });
  return out;
}

template <typename S>
std::atomic<std::uint64_t> Tape<S>::next_epoch_{0};

template class Tape<float>;
template class Tape<double>;

}  // namespace patchprint::ad
