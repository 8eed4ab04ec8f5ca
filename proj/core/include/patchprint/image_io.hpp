#pragma once

#include <string>

#include "patchprint/image.hpp"

namespace patchprint {

// Decodes PNG or JPEG, sniffing the format from file magic (the extension is
// ignored). Gray and gray+alpha decode to 1 channel, everything else to 3;
// alpha is dropped, palettes are expanded, 16-bit PNG is reduced to 8.
// Samples map to v/255 floats.
// Throws FileNotFound, UnsupportedFormat, CorruptData.
Image load_image(const std::string& path);

// 8-bit PNG, 1 or 3 channels, round(v*255) clamped to [0,255]. Fixed encoder
// settings, so identical pixels give identical bytes.
void save_png(const Image& img, const std::string& path);

}  // namespace patchprint
