#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "patchprint/errors.hpp"
#include "patchprint/image.hpp"
#include "patchprint/image_io.hpp"
#include "patchprint/rng.hpp"

using namespace patchprint;

namespace {

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("bilinear resize hits exact corner alignment") {
  // 2x2 -> 3x3: the center is the average of all four corners
  Image img(2, 2, 1);
  img.at(0, 0, 0) = 0.0f;
  img.at(0, 1, 0) = 1.0f;
  img.at(1, 0, 0) = 1.0f;
  img.at(1, 1, 0) = 0.0f;
  const Image up = resize_bilinear(img, 3, 3);
  CHECK(up.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(up.at(0, 2, 0) == doctest::Approx(1.0));
  CHECK(up.at(2, 0, 0) == doctest::Approx(1.0));
  CHECK(up.at(2, 2, 0) == doctest::Approx(0.0));
  CHECK(up.at(1, 1, 0) == doctest::Approx(0.5));
  CHECK(up.at(0, 1, 0) == doctest::Approx(0.5));
}

TEST_CASE("resize to the same size copies exactly") {
  Image img(5, 7, 3);
  SplitMix64 rng(1);
  for (auto& v : img.data) v = static_cast<float>(rng.next_double());
  const Image same = resize_bilinear(img, 5, 7);
  REQUIRE(same.data.size() == img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) CHECK(same.data[i] == img.data[i]);
}

TEST_CASE("resize of a constant image stays constant") {
  Image img(9, 4, 3, 0.25f);
  const Image out = resize_bilinear(img, 17, 23);
  for (float v : out.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("downsample then upsample preserves a linear ramp") {
  // corner-aligned bilinear represents affine functions exactly
  Image img(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img.at(y, x, 0) = static_cast<float>(x) / 15.0f;
  const Image small = resize_bilinear(img, 16, 6);
  const Image back = resize_bilinear(small, 16, 16);
  for (int x = 0; x < 16; ++x)
    CHECK(back.at(7, x, 0) == doctest::Approx(img.at(7, x, 0)).epsilon(1e-5));
}

TEST_CASE("luma uses BT.601 weights") {
  Image img(1, 1, 3);
  img.at(0, 0, 0) = 1.0f;
  const Image r = to_luma(img);
  CHECK(r.at(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-6));
  img.at(0, 0, 0) = 0.0f;
  img.at(0, 0, 1) = 1.0f;
  CHECK(to_luma(img).at(0, 0, 0) == doctest::Approx(0.587).epsilon(1e-6));
  img.at(0, 0, 1) = 0.0f;
  img.at(0, 0, 2) = 1.0f;
  CHECK(to_luma(img).at(0, 0, 0) == doctest::Approx(0.114).epsilon(1e-6));

  Image gray(2, 2, 1, 0.4f);
  const Image g = to_luma(gray);
  CHECK(g.channels == 1);
  CHECK(g.at(1, 1, 0) == doctest::Approx(0.4));
}

TEST_CASE("png round trip is exact at 8-bit resolution") {
  Image img(13, 9, 3);
  SplitMix64 rng(7);
  for (auto& v : img.data) v = static_cast<float>(rng.bounded(256)) / 255.0f;
  const std::string path = tmp_path("pp_roundtrip.png");
  save_png(img, path);
  const Image back = load_image(path);
  REQUIRE(back.height == 13);
  REQUIRE(back.width == 9);
  REQUIRE(back.channels == 3);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-9));
  std::remove(path.c_str());
}

TEST_CASE("identical pixels write identical png bytes") {
  Image img(8, 8, 1);
  SplitMix64 rng(3);
  for (auto& v : img.data) v = static_cast<float>(rng.next_double());
  const std::string p1 = tmp_path("pp_det1.png");
  const std::string p2 = tmp_path("pp_det2.png");
  save_png(img, p1);
  save_png(img, p2);
  auto slurp = [](const std::string& p) {
    FILE* f = std::fopen(p.c_str(), "rb");
    REQUIRE(f != nullptr);
    std::string buf;
    char chunk[4096];
    size_t n;
    while ((n = std::fread(chunk, 1, sizeof chunk, f)) > 0) buf.append(chunk, n);
    std::fclose(f);
    return buf;
  };
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("loader failure modes") {
  CHECK_THROWS_AS((void)load_image("/nonexistent/nowhere.png"), FileNotFound);
  const std::string junk = tmp_path("pp_junk.bin");
  FILE* f = std::fopen(junk.c_str(), "wb");
  REQUIRE(f != nullptr);
  std::fputs("this is not an image at all, just text padding padding", f);
  std::fclose(f);
  CHECK_THROWS_AS((void)load_image(junk), UnsupportedFormat);

  // valid magic, garbage body
  const std::string broken = tmp_path("pp_broken.png");
  f = std::fopen(broken.c_str(), "wb");
  REQUIRE(f != nullptr);
  const unsigned char magic[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::fwrite(magic, 1, 8, f);
  std::fputs("garbagegarbagegarbage", f);
  std::fclose(f);
  CHECK_THROWS_AS((void)load_image(broken), CorruptData);
  std::remove(junk.c_str());
  std::remove(broken.c_str());
}

TEST_CASE("ensure_rgb expands gray and passes rgb through") {
  Image gray(2, 2, 1, 0.3f);
  const Image rgb = ensure_rgb(gray);
  REQUIRE(rgb.channels == 3);
  CHECK(rgb.at(1, 0, 0) == doctest::Approx(0.3));
  CHECK(rgb.at(1, 0, 2) == doctest::Approx(0.3));
  Image c(2, 2, 3, 0.6f);
  const Image same = ensure_rgb(c);
  CHECK(same.channels == 3);
  CHECK(same.at(0, 1, 1) == doctest::Approx(0.6));
}
