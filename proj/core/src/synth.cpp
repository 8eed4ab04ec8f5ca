#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "patchprint/dataset.hpp"
#include "patchprint/degrade.hpp"
#include "patchprint/errors.hpp"
#include "patchprint/image.hpp"
#include "patchprint/image_io.hpp"
#include "patchprint/rng.hpp"

namespace patchprint {
namespace {

constexpr int kSide = 256;

// Smooth base signal: a coarse random control grid blown up bilinearly,
// scaled by a mild per-image gain.
Image smooth_gradient(SplitMix64& rng) {
  const int g = 3 + static_cast<int>(rng.bounded(3));  // 3..5 control points
  Image grid(g, g, 3);
  for (auto& v : grid.data) v = static_cast<float>(rng.next_double());
  Image img = resize_bilinear(grid, kSide, kSide);
  const float gain = static_cast<float>(0.9 + 0.2 * rng.next_double());
  for (auto& v : img.data) v *= gain;
  return img;
}

}  // namespace

std::string make_synthetic_corpus(const std::string& dir, int n_per_class, std::uint64_t seed,
                                  double sensor_sigma) {
  if (n_per_class < 1) throw EmptyInput("synthetic corpus: n_per_class must be at least 1");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("synthetic corpus: cannot create " + dir);

  std::vector<Sample> samples;
  char name[64];
  for (int cls = 0; cls < 2; ++cls) {
    const bool real = cls == 0;
    for (int i = 0; i < n_per_class; ++i) {
      SplitMix64 rng = derive_rng(seed, {static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(i)});
      Image img = smooth_gradient(rng);

      Image noise(kSide, kSide, 3);
      for (auto& v : noise.data) v = static_cast<float>(rng.gaussian() * sensor_sigma);
      if (!real) noise = gaussian_blur(noise, 2.0);  // kills most of the field
      for (size_t j = 0; j < img.data.size(); ++j)
        img.data[j] = std::clamp(img.data[j] + noise.data[j], 0.0f, 1.0f);

      std::snprintf(name, sizeof name, "%s_%04d.png", real ? "real" : "fake", i);
      const std::string path = (std::filesystem::path(dir) / name).string();
      save_png(img, path);

      Sample s;
      s.path = path;
      s.label = real ? Label::real : Label::fake;
      s.generator = real ? "camera" : "smoothnoise";
      s.split = (i % 5 == 4) ? Split::test : Split::train;
      samples.push_back(std::move(s));
    }
  }
  const std::string manifest = (std::filesystem::path(dir) / "manifest.jsonl").string();
  save_manifest(samples, manifest);
  return manifest;
}

}  // namespace patchprint
