#pragma once

#include <array>
#include <vector>

#include "patchprint/image.hpp"

namespace patchprint {

// Three fixed 5x5 high-pass residual kernels (spatial rich model family):
// a second-order square predictor (/4), the third-order 5x5 square (/12) and
// a horizontal second-order line (/2). Integer taps with their divisors are
// exposed so tests can check normalization exactly.
struct SrmKernelBank {
  static constexpr int kCount = 3;
  static constexpr int kSize = 5;
  std::array<std::array<std::array<int, kSize>, kSize>, kCount> taps;
  std::array<int, kCount> divisors;

  static const SrmKernelBank& instance();
  // taps/divisor as floats, row-major 25 per kernel
  std::array<float, kSize * kSize> normalized(int k) const;
};

// Planar residual stack: data[k*H*W + y*W + x], exactly kCount planes.
struct NoiseFingerprint {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int k, int y, int x) const {
    return data[(static_cast<size_t>(k) * height + y) * width + x];
  }
};

// Luma first, then each kernel cross-correlated (no flip) over the plane
// with edge-replicate padding 2, same-size output. Integer taps are
// accumulated in double and divided once at the end, so a flat plane cancels
// to exactly zero (borders included) and an impulse reproduces normalized()
// bit for bit. Residuals are raw: no quantization or truncation.
NoiseFingerprint extract_fingerprint(const Image& img);

}  // namespace patchprint
