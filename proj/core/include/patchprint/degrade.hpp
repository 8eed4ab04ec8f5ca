#pragma once

#include <array>
#include <utility>

#include "patchprint/image.hpp"
#include "patchprint/patch.hpp"
#include "patchprint/rng.hpp"

namespace patchprint {

// Separable Gaussian blur, kernel radius ceil(3*sigma), taps renormalized
// to sum 1, borders handled by symmetric reflection (-1 -> 0, -2 -> 1).
// sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);

// In-memory JPEG-style round trip: YCbCr, 8x8 DCT, quantize with the
// standard luminance table scaled for `quality` (1..100), dequantize,
// inverse DCT, back to RGB. No entropy coding; the point is the exact
// quantization loss at a given quality, not a byte stream. The image is
// edge-replicated to a multiple of 8 and cropped back afterwards.
Image jpeg_compress(const Image& img, int quality);

// Quantization table for a quality factor, libjpeg scaling rule.
std::array<int, 64> jpeg_quant_table(int quality);

enum class DegradationKind { blur = 0, compress = 1, intact = 2 };

struct DegradationConfig {
  double probability = 0.10;  // chance of blur; same chance of compression
  double sigma_min = 0.0, sigma_max = 1.0;
  int quality_min = 90, quality_max = 100;
};

struct DegradationResult {
  Image image;
  DegradationKind kind = DegradationKind::intact;
  double sigma = 0.0;  // set when kind == blur
  int quality = 0;     // set when kind == compress
  std::array<float, 3> onehot() const {
    std::array<float, 3> w{0, 0, 0};
    w[static_cast<int>(kind)] = 1.0f;
    return w;
  }
};

// One uniform draw u decides the branch: u < p blur, p <= u < 2p compress,
// else intact. At most one degradation per call; parameters drawn only on
// the branch taken.
DegradationResult augment(const Image& img, const DegradationConfig& cfg, SplitMix64& rng);

// Same draw on a patch; origin and source id carry over unchanged.
std::pair<Patch, std::array<float, 3>> augment_patch(const Patch& patch,
                                                     const DegradationConfig& cfg,
                                                     SplitMix64& rng);

}  // namespace patchprint
