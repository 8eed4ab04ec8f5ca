#include "patchprint/srm.hpp"

#include <algorithm>

#include "patchprint/errors.hpp"

namespace patchprint {

const SrmKernelBank& SrmKernelBank::instance() {
  static const SrmKernelBank bank = [] {
    SrmKernelBank b;
    b.taps[0] = {{{0, 0, 0, 0, 0},
                  {0, -1, 2, -1, 0},
                  {0, 2, -4, 2, 0},
                  {0, -1, 2, -1, 0},
                  {0, 0, 0, 0, 0}}};
    b.taps[1] = {{{-1, 2, -2, 2, -1},
                  {2, -6, 8, -6, 2},
                  {-2, 8, -12, 8, -2},
                  {2, -6, 8, -6, 2},
                  {-1, 2, -2, 2, -1}}};
    b.taps[2] = {{{0, 0, 0, 0, 0},
                  {0, 0, 0, 0, 0},
                  {0, 1, -2, 1, 0},
                  {0, 0, 0, 0, 0},
                  {0, 0, 0, 0, 0}}};
    b.divisors = {4, 12, 2};
    return b;
  }();
  return bank;
}

std::array<float, 25> SrmKernelBank::normalized(int k) const {
  std::array<float, 25> out{};
  for (int i = 0; i < kSize; ++i)
    for (int j = 0; j < kSize; ++j)
      out[i * kSize + j] = static_cast<float>(taps[k][i][j] / static_cast<double>(divisors[k]));
  return out;
}

NoiseFingerprint extract_fingerprint(const Image& img) {
  if (img.empty()) throw EmptyInput("extract_fingerprint: empty image");
  const Image luma = to_luma(img);
  const int h = luma.height, w = luma.width;

  NoiseFingerprint fp;
  fp.height = h;
  fp.width = w;
  fp.data.resize(static_cast<size_t>(SrmKernelBank::kCount) * h * w);

  const auto& bank = SrmKernelBank::instance();
  constexpr int kPad = SrmKernelBank::kSize / 2;
  const size_t plane_sz = static_cast<size_t>(h) * w;
  for (int k = 0; k < SrmKernelBank::kCount; ++k) {
    // Integer taps accumulated in double, one division at the end: partial
    // sums over a flat region are exact integer multiples of its value, so a
    // constant plane cancels to exactly zero instead of float-tap round-off.
    const auto& taps = bank.taps[k];
    const double div = bank.divisors[k];
    float* out = fp.data.data() + k * plane_sz;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int ky = 0; ky < SrmKernelBank::kSize; ++ky) {
          // replicate padding: clamp sample coords to the plane
          const int sy = std::clamp(y + ky - kPad, 0, h - 1);
          const float* row = &luma.data[static_cast<size_t>(sy) * w];
          for (int kx = 0; kx < SrmKernelBank::kSize; ++kx) {
            const int tap = taps[ky][kx];
            if (tap == 0) continue;
            const int sx = std::clamp(x + kx - kPad, 0, w - 1);
            acc += tap * static_cast<double>(row[sx]);
          }
        }
        out[static_cast<size_t>(y) * w + x] = static_cast<float>(acc / div);
      }
    }
  }
  return fp;
}

}  // namespace patchprint
