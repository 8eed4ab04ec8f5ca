#include <cmath>
#include <vector>

#include "doctest.h"
#include "patchprint/image.hpp"
#include "patchprint/rng.hpp"
#include "patchprint/srm.hpp"

using namespace patchprint;

namespace {

// independent same-size cross-correlation with edge-replicate padding, plain loops
std::vector<float> oracle_correlate(const std::vector<float>& plane, int h, int w,
                                    const float* kernel, int ksize) {
  const int r = ksize / 2;
  std::vector<float> out(static_cast<size_t>(h) * w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < ksize; ++ky) {
        for (int kx = 0; kx < ksize; ++kx) {
          const int sy = std::min(std::max(y + ky - r, 0), h - 1);
          const int sx = std::min(std::max(x + kx - r, 0), w - 1);
          acc += static_cast<double>(plane[static_cast<size_t>(sy) * w + sx]) *
                 kernel[ky * ksize + kx];
        }
      }
      out[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("kernel bank holds the three fixed predictors") {
  const auto& bank = SrmKernelBank::instance();
  CHECK(bank.divisors[0] == 4);
  CHECK(bank.divisors[1] == 12);
  CHECK(bank.divisors[2] == 2);

  // third-order 5x5 square, frozen row by row
  const int square5[5][5] = {{-1, 2, -2, 2, -1},
                             {2, -6, 8, -6, 2},
                             {-2, 8, -12, 8, -2},
                             {2, -6, 8, -6, 2},
                             {-1, 2, -2, 2, -1}};
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) CHECK(bank.taps[1][y][x] == square5[y][x]);

  // horizontal second-order line: center row 0,1,-2,1,0, all else zero
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) CHECK(bank.taps[2][y][x] == (y == 2 ? (x == 1 || x == 3 ? 1 : (x == 2 ? -2 : 0)) : 0));

  // every kernel is a residual predictor: taps sum to zero
  for (int k = 0; k < SrmKernelBank::kCount; ++k) {
    int s = 0;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) s += bank.taps[k][y][x];
    CHECK(s == 0);
    const auto norm = bank.normalized(k);
    for (int i = 0; i < 25; ++i)
      CHECK(norm[i] == static_cast<float>(static_cast<double>(bank.taps[k][i / 5][i % 5]) /
                                          bank.divisors[k]));
  }
}

TEST_CASE("constant input leaves zero residual everywhere, borders included") {
  Image img(16, 16, 3, 0.37f);
  const auto fp = extract_fingerprint(img);
  REQUIRE(fp.height == 16);
  REQUIRE(fp.width == 16);
  // taps sum to zero and replicate padding extends the constant, so the
  // residual vanishes out to the borders
  for (int k = 0; k < SrmKernelBank::kCount; ++k)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) CHECK(fp.at(k, y, x) == 0.0f);
}

TEST_CASE("impulse response reproduces the normalized taps exactly") {
  Image img(11, 11, 1);
  img.at(5, 5, 0) = 1.0f;
  const auto fp = extract_fingerprint(img);
  const auto& bank = SrmKernelBank::instance();
  for (int k = 0; k < SrmKernelBank::kCount; ++k) {
    const auto norm = bank.normalized(k);
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 11; ++x) {
        const int dy = y - 5, dx = x - 5;
        // luma of a gray impulse is the impulse itself; correlation centers
        // the flipped-index tap at the impulse, zero beyond kernel reach
        const float expect = (std::abs(dy) <= 2 && std::abs(dx) <= 2)
                                 ? norm[(2 - dy) * 5 + (2 - dx)]
                                 : 0.0f;
        CHECK(fp.at(k, y, x) == expect);
      }
  }
}

TEST_CASE("fingerprint matches the naive correlation oracle within 1e-6") {
  SplitMix64 rng(123);
  Image img(24, 17, 3);
  for (auto& v : img.data) v = static_cast<float>(rng.next_double());
  const Image luma = to_luma(img);
  std::vector<float> plane(luma.data.begin(), luma.data.end());
  const auto fp = extract_fingerprint(img);
  const auto& bank = SrmKernelBank::instance();
  for (int k = 0; k < SrmKernelBank::kCount; ++k) {
    const auto norm = bank.normalized(k);
    const auto want = oracle_correlate(plane, 24, 17, norm.data(), 5);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 17; ++x)
        CHECK(fp.at(k, y, x) == doctest::Approx(want[static_cast<size_t>(y) * 17 + x]).epsilon(1e-6));
  }
}

TEST_CASE("residuals are raw: no clamping of large values") {
  Image img(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(y, x, 0) = ((x + y) % 2 == 0) ? 1.0f : 0.0f;
  const auto fp = extract_fingerprint(img);
  float peak = 0;
  for (float v : fp.data) peak = std::max(peak, std::abs(v));
  CHECK(peak > 1.0f);  // checkerboard drives the square5 kernel well past [0,1]
}
