#include "patchprint/evaluate.hpp"

#include <functional>

#include "patchprint/degrade.hpp"
#include "patchprint/errors.hpp"
#include "patchprint/image_io.hpp"

namespace patchprint {
namespace {

constexpr std::uint64_t kTagEval = 5;

Metrics run_eval(const std::vector<Sample>& samples, const EvalDegradation& deg,
                 std::uint64_t seed,
                 const std::function<float(const Image&, std::uint64_t)>& score) {
  if (samples.empty()) throw EmptyInput("evaluate: no samples");
  std::vector<ScoredSample> scored(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const Image img = apply_eval_degradation(load_image(samples[i].path), deg);
    ScoredSample s;
    s.score = score(img, eval_crop_seed(seed, static_cast<int>(i)));
    s.label = samples[i].label;
    s.generator = samples[i].generator;
    scored[i] = std::move(s);
  }
  return compute_metrics(scored);
}

}  // namespace

Image apply_eval_degradation(const Image& img, const EvalDegradation& deg) {
  if (deg.has_blur) return gaussian_blur(img, deg.sigma);
  if (deg.has_jpeg) return jpeg_compress(img, deg.qf);
  return img;
}

std::uint64_t eval_crop_seed(std::uint64_t seed, int sample_index) {
  return derive_rng(seed, {kTagEval, static_cast<std::uint64_t>(sample_index)}).state;
}

float score_ssp(SspBundle& b, const Image& img, std::uint64_t crop_seed) {
  return models::ssp_forward(img, b.clf, b.pipe, crop_seed);
}

float score_essp(EsspBundle& b, const Image& img, std::uint64_t crop_seed) {
  return models::essp_forward(img, b.clf, b.perc, b.emb, b.unet, b.pipe, crop_seed);
}

Metrics evaluate_ssp(const std::vector<Sample>& samples, SspBundle& b,
                     const EvalDegradation& deg, std::uint64_t seed) {
  return run_eval(samples, deg, seed,
                  [&](const Image& img, std::uint64_t cs) { return score_ssp(b, img, cs); });
}

Metrics evaluate_essp(const std::vector<Sample>& samples, EsspBundle& b,
                      const EvalDegradation& deg, std::uint64_t seed) {
  return run_eval(samples, deg, seed,
                  [&](const Image& img, std::uint64_t cs) { return score_essp(b, img, cs); });
}

}  // namespace patchprint
