#pragma once

#include <vector>

namespace patchprint {

// Row-major, channel-interleaved float image. Pixel values live in [0, 1]
// for anything that crossed a file boundary; intermediate math may leave the
// range and is clamped where the contract requires it.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;  // height * width * channels

  Image() = default;
  Image(int h, int w, int c, float fill = 0.f)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
  bool empty() const { return data.empty(); }
};

// Corner-aligned bilinear resampling: source position of output pixel i is
// i * (in-1)/(out-1), so the four corners map exactly. out==in returns a
// copy; a 1-pixel output axis samples index 0.
Image resize_bilinear(const Image& img, int out_h, int out_w);

// ITU-R BT.601 luma, Y = 0.299 R + 0.587 G + 0.114 B. Single-channel input
// is returned as-is.
Image to_luma(const Image& img);

// Gray -> 3-channel replication; 3-channel input is returned unchanged.
Image ensure_rgb(const Image& img);

}  // namespace patchprint
