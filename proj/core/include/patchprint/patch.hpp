#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchprint/image.hpp"

namespace patchprint {

struct Patch {
  Image pixels;           // M x M x C
  int origin_row = 0;     // top-left in the source image
  int origin_col = 0;
  std::string source_id;  // opaque caller tag
};

struct DiversityScore {
  double value = 0.0;
};

enum class SelectMode { simplest, most_complex };

// Texture diversity: per channel, the sum of absolute differences between
// horizontal, vertical, diagonal and anti-diagonal neighbors
//
//   sum |x(i,j+1)-x(i,j)| + sum |x(i+1,j)-x(i,j)|
// + sum |x(i+1,j+1)-x(i,j)| + sum |x(i+1,j)-x(i,j+1)|
//
// accumulated in that order, row-major within each sum, channels in index
// order, each partial in its own double. The order is part of the contract:
// with inputs on a finite grid (e.g. k/255) any independent implementation
// that follows it reproduces the score bit-for-bit.
DiversityScore texture_diversity(const Patch& patch);
DiversityScore texture_diversity(const Image& pixels);

// As above but on the luma plane of a color patch (paper-faithful variant;
// the per-channel sum is the library default).
DiversityScore texture_diversity_luma(const Image& pixels);

// `count` M x M crops at seeded uniform origins (SplitMix64; row then column,
// each next() % (dim - m + 1)). Overlap allowed. Throws PatchTooLarge if m
// exceeds either image dimension.
std::vector<Patch> crop_patches(const Image& img, int m, int count, std::uint64_t seed,
                                const std::string& source_id = "");

// Lowest (simplest) or highest (most_complex) diversity; ties resolve to the
// lowest index. Throws EmptyInput.
const Patch& select_patch(const std::vector<Patch>& patches, SelectMode mode);
std::size_t select_patch_index(const std::vector<Patch>& patches, SelectMode mode);

// Indices of the k lowest-diversity patches, ascending score, ties by
// index. Throws EmptyInput, KTooLarge.
std::vector<std::size_t> select_top_k_indices(const std::vector<Patch>& patches, int k);

// k lowest-diversity patches stacked along channels (M x M x k*C), ascending
// score, ties by index. Throws EmptyInput, KTooLarge.
Image select_top_k(const std::vector<Patch>& patches, int k);

// Corner-aligned bilinear enlargement of the patch pixels to size x size.
Image upsample_patch(const Patch& patch, int size);

}  // namespace patchprint
