#pragma once

#include "patchprint/metrics.hpp"
#include "patchprint/train.hpp"

namespace patchprint {

// Whole-image degradation applied after decode, before the pipeline. At
// most one of the two is active.
struct EvalDegradation {
  bool has_blur = false;
  double sigma = 0.0;
  bool has_jpeg = false;
  int qf = 100;
};

Image apply_eval_degradation(const Image& img, const EvalDegradation& deg);

// One image through the pipeline; crop_seed pins the candidate crops.
float score_ssp(SspBundle& b, const Image& img, std::uint64_t crop_seed);
float score_essp(EsspBundle& b, const Image& img, std::uint64_t crop_seed);

// Per-sample crop seed used by both evaluators, derived from (seed, sample
// index) only, so ssp and essp see identical candidate patches.
std::uint64_t eval_crop_seed(std::uint64_t seed, int sample_index);

Metrics evaluate_ssp(const std::vector<Sample>& samples, SspBundle& b,
                     const EvalDegradation& deg, std::uint64_t seed);
Metrics evaluate_essp(const std::vector<Sample>& samples, EsspBundle& b,
                      const EvalDegradation& deg, std::uint64_t seed);

}  // namespace patchprint
