#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "patchprint/metrics.hpp"
#include "patchprint/rng.hpp"

using namespace patchprint;

namespace {

// brute-force AP: stable sort by descending score, walk the ranking, average
// precision at every positive hit
double oracle_ap(std::vector<double> scores, std::vector<bool> positive) {
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double sum = 0;
  int hits = 0, npos = 0;
  for (size_t r = 0; r < order.size(); ++r) {
    if (positive[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  for (bool p : positive) npos += p ? 1 : 0;
  return npos == 0 ? 0.0 : sum / npos;
}

}  // namespace

TEST_CASE("average precision frozen cases") {
  // perfect ranking
  CHECK(average_precision({0.9, 0.8, 0.2, 0.1}, {true, true, false, false}) ==
        doctest::Approx(1.0));
  // worst ranking of one positive among four
  CHECK(average_precision({0.9, 0.8, 0.7, 0.1}, {false, false, false, true}) ==
        doctest::Approx(0.25));
  // positive at ranks 1 and 3: (1/1 + 2/3)/2
  CHECK(average_precision({0.9, 0.8, 0.7}, {true, false, true}) ==
        doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  // no positives
  CHECK(average_precision({0.5, 0.4}, {false, false}) == doctest::Approx(0.0));
}

TEST_CASE("average precision agrees with the oracle on random sets") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(50));
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<bool> positive(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      // quantized scores force plenty of ties
      scores[static_cast<size_t>(i)] = static_cast<double>(rng.bounded(8)) / 8.0;
      positive[static_cast<size_t>(i)] = rng.bounded(2) == 1;
    }
    const double got = average_precision(scores, positive);
    const double want = oracle_ap(scores, positive);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("accuracy counts both classes at the 0.5 threshold") {
  std::vector<ScoredSample> scored = {
      {0.9, Label::real, "camera"},   // right
      {0.5, Label::real, "camera"},   // right: >= 0.5 is real
      {0.2, Label::real, "camera"},   // wrong
      {0.1, Label::fake, "gan"},      // right
      {0.7, Label::fake, "gan"},      // wrong
  };
  const Metrics m = compute_metrics(scored);
  CHECK(m.acc == doctest::Approx(3.0 / 5.0));
  CHECK(m.n_real == 3);
  CHECK(m.n_fake == 2);
}

TEST_CASE("map pools every real with each generator tag") {
  std::vector<ScoredSample> scored = {
      {0.9, Label::real, "camera"}, {0.6, Label::real, "camera"},
      {0.1, Label::fake, "gan"},    {0.8, Label::fake, "gan"},
      {0.2, Label::fake, "diff"},
  };
  const Metrics m = compute_metrics(scored);
  REQUIRE(m.per_subset.count("gan") == 1);
  REQUIRE(m.per_subset.count("diff") == 1);
  CHECK(m.per_subset.count("camera") == 0);  // no fakes carry the real tag

  // gan pool: fake-scores (1-s) for reals 0.1, 0.4 and gan fakes 0.9, 0.2
  CHECK(m.per_subset.at("gan").ap ==
        doctest::Approx(oracle_ap({0.1, 0.4, 0.9, 0.2}, {false, false, true, true})));
  // diff pool: reals plus the single diff fake
  CHECK(m.per_subset.at("diff").ap ==
        doctest::Approx(oracle_ap({0.1, 0.4, 0.8}, {false, false, true})));
  CHECK(m.map == doctest::Approx((m.per_subset.at("gan").ap + m.per_subset.at("diff").ap) / 2.0));
  CHECK(m.per_subset.at("gan").n == 4);
  CHECK(m.per_subset.at("diff").n == 3);
}

TEST_CASE("json rendering is deterministic and carries extras") {
  std::vector<ScoredSample> scored = {{0.9, Label::real, "camera"}, {0.1, Label::fake, "gan"}};
  const Metrics m = compute_metrics(scored);
  const std::string a = metrics_to_json(m, {{"mode", "ssp"}});
  const std::string b = metrics_to_json(m, {{"mode", "ssp"}});
  CHECK(a == b);
  CHECK(a.find("\"mode\"") != std::string::npos);
  CHECK(a.find("\"acc\"") != std::string::npos);
  CHECK(a.back() == '\n');
}
