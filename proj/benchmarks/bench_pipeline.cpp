#include <benchmark/benchmark.h>

#include "patchprint/degrade.hpp"
#include "patchprint/image.hpp"
#include "patchprint/patch.hpp"
#include "patchprint/rng.hpp"
#include "patchprint/srm.hpp"

using namespace patchprint;

namespace {

Image noise_image(int h, int w, int c, std::uint64_t seed) {
  Image img(h, w, c);
  SplitMix64 rng(seed);
  for (auto& v : img.data) v = static_cast<float>(rng.next_double());
  return img;
}

void bm_texture_diversity(benchmark::State& state) {
  const Image img = noise_image(32, 32, 3, 1);
  Patch p{img, 0, 0, ""};
  for (auto _ : state) benchmark::DoNotOptimize(texture_diversity(p).value);
}
BENCHMARK(bm_texture_diversity);

void bm_crop_and_select(benchmark::State& state) {
  const Image img = noise_image(256, 256, 3, 2);
  for (auto _ : state) {
    auto patches = crop_patches(img, 32, 64, 7);
    benchmark::DoNotOptimize(select_patch_index(patches, SelectMode::simplest));
  }
}
BENCHMARK(bm_crop_and_select);

void bm_resize_bilinear(benchmark::State& state) {
  const Image img = noise_image(512, 384, 3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(resize_bilinear(img, 256, 256).data.size());
}
BENCHMARK(bm_resize_bilinear);

void bm_srm_fingerprint(benchmark::State& state) {
  const Image img = noise_image(256, 256, 3, 4);
  for (auto _ : state) benchmark::DoNotOptimize(extract_fingerprint(img).data.size());
}
BENCHMARK(bm_srm_fingerprint);

void bm_gaussian_blur(benchmark::State& state) {
  const Image img = noise_image(256, 256, 3, 5);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur(img, 1.0).data.size());
}
BENCHMARK(bm_gaussian_blur);

void bm_jpeg_roundtrip(benchmark::State& state) {
  const Image img = noise_image(256, 256, 3, 6);
  for (auto _ : state) benchmark::DoNotOptimize(jpeg_compress(img, 90).data.size());
}
BENCHMARK(bm_jpeg_roundtrip);

}  // namespace

BENCHMARK_MAIN();
