#include "patchprint/image.hpp"

#include <algorithm>
#include <cmath>

#include "patchprint/errors.hpp"

namespace patchprint {

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (img.empty()) throw EmptyInput("resize_bilinear: empty image");
  if (out_h < 1 || out_w < 1) throw ShapeMismatch("resize_bilinear: non-positive output size");
  if (out_h == img.height && out_w == img.width) return img;

  const int c = img.channels;
  Image out(out_h, out_w, c);
  const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;

  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int k = 0; k < c; ++k) {
        const float top = img.at(y0, x0, k) * (1.f - wx) + img.at(y0, x1, k) * wx;
        const float bot = img.at(y1, x0, k) * (1.f - wx) + img.at(y1, x1, k) * wx;
        out.at(y, x, k) = top * (1.f - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image to_luma(const Image& img) {
  if (img.empty()) throw EmptyInput("to_luma: empty image");
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ShapeMismatch("to_luma: expected 1 or 3 channels");
  Image out(img.height, img.width, 1);
  const size_t n = img.pixel_count();
  for (size_t i = 0; i < n; ++i) {
    const float* p = &img.data[i * 3];
    out.data[i] = static_cast<float>(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
  }
  return out;
}

Image ensure_rgb(const Image& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw ShapeMismatch("ensure_rgb: expected 1 or 3 channels");
  Image out(img.height, img.width, 3);
  const size_t n = img.pixel_count();
  for (size_t i = 0; i < n; ++i) {
    const float v = img.data[i];
    out.data[i * 3 + 0] = v;
    out.data[i * 3 + 1] = v;
    out.data[i * 3 + 2] = v;
  }
  return out;
}

}  // namespace patchprint
