#include "patchprint/patch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "patchprint/errors.hpp"
#include "patchprint/rng.hpp"

namespace patchprint {

DiversityScore texture_diversity(const Image& px) {
  if (px.empty()) throw EmptyInput("texture_diversity: empty patch");
  const int m = px.height;
  if (px.width != m) throw ShapeMismatch("texture_diversity: patch not square");

  double total = 0.0;
  for (int c = 0; c < px.channels; ++c) {
    double horiz = 0.0, vert = 0.0, diag = 0.0, anti = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j + 1 < m; ++j)
        horiz += std::abs(static_cast<double>(px.at(i, j + 1, c)) - px.at(i, j, c));
    for (int i = 0; i + 1 < m; ++i)
      for (int j = 0; j < m; ++j)
        vert += std::abs(static_cast<double>(px.at(i + 1, j, c)) - px.at(i, j, c));
    for (int i = 0; i + 1 < m; ++i)
      for (int j = 0; j + 1 < m; ++j)
        diag += std::abs(static_cast<double>(px.at(i + 1, j + 1, c)) - px.at(i, j, c));
    for (int i = 0; i + 1 < m; ++i)
      for (int j = 0; j + 1 < m; ++j)
        anti += std::abs(static_cast<double>(px.at(i + 1, j, c)) - px.at(i, j + 1, c));
    total += ((horiz + vert) + diag) + anti;
  }
  return DiversityScore{total};
}

DiversityScore texture_diversity(const Patch& patch) { return texture_diversity(patch.pixels); }

DiversityScore texture_diversity_luma(const Image& pixels) {
  return texture_diversity(to_luma(pixels));
}

std::vector<Patch> crop_patches(const Image& img, int m, int count, std::uint64_t seed,
                                const std::string& source_id) {
  if (img.empty()) throw EmptyInput("crop_patches: empty image");
  if (m < 1) throw ShapeMismatch("crop_patches: non-positive patch size");
  if (m > img.height || m > img.width)
    throw PatchTooLarge("crop_patches: patch exceeds image bounds");

  SplitMix64 rng(seed);
  const std::uint64_t rows = static_cast<std::uint64_t>(img.height - m + 1);
  const std::uint64_t cols = static_cast<std::uint64_t>(img.width - m + 1);
  std::vector<Patch> out;
  out.reserve(static_cast<size_t>(count));
  for (int p = 0; p < count; ++p) {
    const int r = static_cast<int>(rng.bounded(rows));
    const int c = static_cast<int>(rng.bounded(cols));
    Patch patch;
    patch.origin_row = r;
    patch.origin_col = c;
    patch.source_id = source_id;
    patch.pixels = Image(m, m, img.channels);
    for (int y = 0; y < m; ++y) {
      const float* src = &img.data[((static_cast<size_t>(r) + y) * img.width + c) * img.channels];
      float* dst = &patch.pixels.data[static_cast<size_t>(y) * m * img.channels];
      std::copy(src, src + static_cast<size_t>(m) * img.channels, dst);
    }
    out.push_back(std::move(patch));
  }
  return out;
}

std::size_t select_patch_index(const std::vector<Patch>& patches, SelectMode mode) {
  if (patches.empty()) throw EmptyInput("select_patch: no patches");
  std::size_t best = 0;
  double best_score = texture_diversity(patches[0]).value;
  for (std::size_t i = 1; i < patches.size(); ++i) {
    const double s = texture_diversity(patches[i]).value;
    const bool better = mode == SelectMode::simplest ? s < best_score : s > best_score;
    if (better) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

const Patch& select_patch(const std::vector<Patch>& patches, SelectMode mode) {
  return patches[select_patch_index(patches, mode)];
}

std::vector<std::size_t> select_top_k_indices(const std::vector<Patch>& patches, int k) {
  if (patches.empty()) throw EmptyInput("select_top_k: no patches");
  if (k < 1 || static_cast<size_t>(k) > patches.size())
    throw KTooLarge("select_top_k: k out of range");

  std::vector<std::size_t> idx(patches.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> scores(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) scores[i] = texture_diversity(patches[i]).value;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  idx.resize(k);
  return idx;
}

Image select_top_k(const std::vector<Patch>& patches, int k) {
  const auto idx = select_top_k_indices(patches, k);
  const Image& first = patches[0].pixels;
  const int m = first.height, c = first.channels;
  Image out(m, m, k * c);
  for (int s = 0; s < k; ++s) {
    const Image& px = patches[idx[s]].pixels;
    if (px.height != m || px.channels != c)
      throw ShapeMismatch("select_top_k: mixed patch shapes");
    for (int y = 0; y < m; ++y)
      for (int x = 0; x < m; ++x)
        for (int ch = 0; ch < c; ++ch) out.at(y, x, s * c + ch) = px.at(y, x, ch);
  }
  return out;
}

Image upsample_patch(const Patch& patch, int size) {
  return resize_bilinear(patch.pixels, size, size);
}

}  // namespace patchprint
