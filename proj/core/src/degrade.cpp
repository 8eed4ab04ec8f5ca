#include "patchprint/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "patchprint/errors.hpp"

namespace patchprint {
namespace {

// symmetric mirror into [0, n): ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
int reflect(int i, int n) {
  const int period = 2 * n;
  i = ((i % period) + period) % period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> gauss_taps(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    taps[i + radius] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// JPEG Annex K luminance table, applied to all three planes here.
constexpr int kBaseQuant[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

struct DctBasis {
  double m[8][8];  // m[u][x] = C(u)/2 * cos((2x+1) u pi / 16)
  DctBasis() {
    const double pi = std::acos(-1.0);
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
      for (int x = 0; x < 8; ++x) m[u][x] = cu / 2.0 * std::cos((2 * x + 1) * u * pi / 16.0);
    }
  }
};

// F = M f M^T, f = M^T F M
void dct8x8(const double in[8][8], double out[8][8], const DctBasis& B) {
  double tmp[8][8];
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double acc = 0;
      for (int y = 0; y < 8; ++y) acc += B.m[u][y] * in[y][x];
      tmp[u][x] = acc;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double acc = 0;
      for (int x = 0; x < 8; ++x) acc += tmp[u][x] * B.m[v][x];
      out[u][v] = acc;
    }
}

void idct8x8(const double in[8][8], double out[8][8], const DctBasis& B) {
  double tmp[8][8];
  for (int y = 0; y < 8; ++y)
    for (int v = 0; v < 8; ++v) {
      double acc = 0;
      for (int u = 0; u < 8; ++u) acc += B.m[u][y] * in[u][v];
      tmp[y][v] = acc;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double acc = 0;
      for (int v = 0; v < 8; ++v) acc += tmp[y][v] * B.m[v][x];
      out[y][x] = acc;
    }
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (img.empty()) throw EmptyInput("gaussian_blur: empty image");
  if (sigma <= 0.0) return img;
  const auto taps = gauss_taps(sigma);
  const int radius = (static_cast<int>(taps.size()) - 1) / 2;
  const int h = img.height, w = img.width, c = img.channels;

  Image tmp = img;
  // horizontal pass
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0;
        for (int t = -radius; t <= radius; ++t)
          acc += taps[t + radius] * img.at(y, reflect(x + t, w), ch);
        tmp.at(y, x, ch) = static_cast<float>(acc);
      }
  // vertical pass
  Image out = img;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0;
        for (int t = -radius; t <= radius; ++t)
          acc += taps[t + radius] * tmp.at(reflect(y + t, h), x, ch);
        out.at(y, x, ch) = static_cast<float>(acc);
      }
  return out;
}

std::array<int, 64> jpeg_quant_table(int quality) {
  quality = std::clamp(quality, 1, 100);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> q{};
  for (int i = 0; i < 64; ++i)
    q[i] = std::clamp((kBaseQuant[i] * scale + 50) / 100, 1, 255);
  return q;
}

Image jpeg_compress(const Image& img, int quality) {
  if (img.empty()) throw EmptyInput("jpeg_compress: empty image");
  if (img.channels != 3 && img.channels != 1)
    throw ShapeMismatch("jpeg_compress: expected 1 or 3 channels");
  const auto q = jpeg_quant_table(quality);
  static const DctBasis basis;

  const int h = img.height, w = img.width;
  const int ph = (h + 7) / 8 * 8, pw = (w + 7) / 8 * 8;
  const int planes = img.channels;

  // to YCbCr (JFIF, full range, no subsampling) on 0..255 values
  std::vector<double> ycc(static_cast<size_t>(planes) * ph * pw);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) {
      const int sy = std::min(y, h - 1), sx = std::min(x, w - 1);
      if (planes == 1) {
        ycc[static_cast<size_t>(y) * pw + x] = img.at(sy, sx, 0) * 255.0;
      } else {
        const double r = img.at(sy, sx, 0) * 255.0;
        const double g = img.at(sy, sx, 1) * 255.0;
        const double b = img.at(sy, sx, 2) * 255.0;
        const size_t p = static_cast<size_t>(y) * pw + x;
        const size_t psz = static_cast<size_t>(ph) * pw;
        ycc[p] = 0.299 * r + 0.587 * g + 0.114 * b;
        ycc[psz + p] = 128.0 - 0.168735892 * r - 0.331264108 * g + 0.5 * b;
        ycc[2 * psz + p] = 128.0 + 0.5 * r - 0.418687589 * g - 0.081312411 * b;
      }
    }

  for (int pl = 0; pl < planes; ++pl) {
    double* plane = ycc.data() + static_cast<size_t>(pl) * ph * pw;
    for (int by = 0; by < ph; by += 8)
      for (int bx = 0; bx < pw; bx += 8) {
        double blk[8][8], coef[8][8];
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            blk[y][x] = plane[static_cast<size_t>(by + y) * pw + bx + x] - 128.0;
        dct8x8(blk, coef, basis);
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            const int qv = q[u * 8 + v];
            coef[u][v] = std::round(coef[u][v] / qv) * qv;
          }
        idct8x8(coef, blk, basis);
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            plane[static_cast<size_t>(by + y) * pw + bx + x] = blk[y][x] + 128.0;
      }
  }

  Image out;
  out.height = h;
  out.width = w;
  out.channels = planes;
  out.data.resize(static_cast<size_t>(h) * w * planes);
  const size_t psz = static_cast<size_t>(ph) * pw;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t p = static_cast<size_t>(y) * pw + x;
      if (planes == 1) {
        out.at(y, x, 0) = static_cast<float>(std::clamp(ycc[p] / 255.0, 0.0, 1.0));
      } else {
        const double Y = ycc[p], cb = ycc[psz + p] - 128.0, cr = ycc[2 * psz + p] - 128.0;
        const double r = Y + 1.402 * cr;
        const double g = Y - 0.344136286 * cb - 0.714136286 * cr;
        const double b = Y + 1.772 * cb;
        out.at(y, x, 0) = static_cast<float>(std::clamp(r / 255.0, 0.0, 1.0));
        out.at(y, x, 1) = static_cast<float>(std::clamp(g / 255.0, 0.0, 1.0));
        out.at(y, x, 2) = static_cast<float>(std::clamp(b / 255.0, 0.0, 1.0));
      }
    }
  return out;
}

DegradationResult augment(const Image& img, const DegradationConfig& cfg, SplitMix64& rng) {
  DegradationResult res;
  const double u = rng.next_double();
  if (u < cfg.probability) {
    res.kind = DegradationKind::blur;
    res.sigma = cfg.sigma_min + rng.next_double() * (cfg.sigma_max - cfg.sigma_min);
    res.image = gaussian_blur(img, res.sigma);
  } else if (u < 2.0 * cfg.probability) {
    res.kind = DegradationKind::compress;
    res.quality = rng.uniform_int(cfg.quality_min, cfg.quality_max);
    res.image = jpeg_compress(img, res.quality);
  } else {
    res.kind = DegradationKind::intact;
    res.image = img;
  }
  return res;
}

std::pair<Patch, std::array<float, 3>> augment_patch(const Patch& patch,
                                                     const DegradationConfig& cfg,
                                                     SplitMix64& rng) {
  DegradationResult r = augment(patch.pixels, cfg, rng);
  Patch out;
  out.pixels = std::move(r.image);
  out.origin_row = patch.origin_row;
  out.origin_col = patch.origin_col;
  out.source_id = patch.source_id;
  return {std::move(out), r.onehot()};
}

}  // namespace patchprint
