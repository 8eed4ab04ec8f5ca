#include "patchprint/train.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "json.hpp"

#include "patchprint/adam.hpp"
#include "patchprint/errors.hpp"
#include "patchprint/image_io.hpp"
#include "patchprint/parallel.hpp"
#include "patchprint/rng.hpp"

namespace patchprint {
namespace {

// rng stream tags; shared by training and evaluation code
constexpr std::uint64_t kTagInit = 1;
constexpr std::uint64_t kTagShuffle = 2;
constexpr std::uint64_t kTagCrop = 3;
constexpr std::uint64_t kTagAug = 4;

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log_epoch(const nlohmann::json& j) {
  std::fputs((j.dump() + "\n").c_str(), stdout);
  std::fflush(stdout);
}

void require_both_classes(const std::vector<Sample>& set, const char* who) {
  if (set.empty()) throw EmptyInput(std::string(who) + ": empty training set");
  bool has_real = false, has_fake = false;
  for (const auto& s : set) (s.label == Label::real ? has_real : has_fake) = true;
  if (!has_real || !has_fake)
    throw SingleClassDataset(std::string(who) + ": need both real and fake samples");
}

std::vector<Image> cache_resized(const std::vector<Sample>& set, int side) {
  std::vector<Image> out;
  out.reserve(set.size());
  for (const auto& s : set)
    out.push_back(resize_bilinear(ensure_rgb(load_image(s.path)), side, side));
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::map<std::string, std::string> train_meta(const TrainConfig& cfg, const char* mode) {
  auto meta = pipe_meta(cfg.pipe);
  meta["mode"] = mode;
  meta["seed"] = std::to_string(cfg.seed);
  meta["epochs"] = std::to_string(cfg.epochs);
  meta["batch"] = std::to_string(cfg.batch);
  meta["lr"] = fmt_double(cfg.lr);
  meta["aug_prob"] = fmt_double(cfg.aug.probability);
  meta["sigma_min"] = fmt_double(cfg.aug.sigma_min);
  meta["sigma_max"] = fmt_double(cfg.aug.sigma_max);
  meta["qf_min"] = std::to_string(cfg.aug.quality_min);
  meta["qf_max"] = std::to_string(cfg.aug.quality_max);
  std::string all;
  for (const auto& [k, v] : meta) all += k + "=" + v + ";";
  meta["config_digest"] = digest64(all);
  return meta;
}

}  // namespace

std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  SplitMix64 rng = derive_rng(seed, {kTagShuffle, static_cast<std::uint64_t>(epoch)});
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

std::map<std::string, std::string> pipe_meta(const models::PipelineOptions& pipe) {
  std::map<std::string, std::string> m;
  m["image_size"] = std::to_string(pipe.image_size);
  m["patch"] = std::to_string(pipe.patch_size);
  m["crops"] = std::to_string(pipe.crops);
  m["select"] = pipe.select == SelectMode::simplest ? "simplest" : "complex";
  m["topk"] = std::to_string(pipe.topk);
  m["use_srm"] = pipe.use_srm ? "1" : "0";
  m["use_perception"] = pipe.use_perception ? "1" : "0";
  return m;
}

models::PipelineOptions pipe_from_meta(const Checkpoint& ck) {
  models::PipelineOptions p;
  p.image_size = std::stoi(ck.meta_or("image_size", "256"));
  p.patch_size = std::stoi(ck.meta_or("patch", "32"));
  p.crops = std::stoi(ck.meta_or("crops", "64"));
  p.select = ck.meta_or("select", "simplest") == "complex" ? SelectMode::most_complex
                                                           : SelectMode::simplest;
  p.topk = std::stoi(ck.meta_or("topk", "1"));
  p.use_srm = ck.meta_or("use_srm", "1") == "1";
  p.use_perception = ck.meta_or("use_perception", "1") == "1";
  return p;
}

std::unique_ptr<SspBundle> make_ssp_bundle(const models::PipelineOptions& pipe,
                                           std::uint64_t seed) {
  auto b = std::make_unique<SspBundle>();
  b->pipe = pipe;
  b->seed = seed;
  SplitMix64 rng = derive_rng(seed, {kTagInit});
  b->clf.init(models::pipeline_channels(pipe), rng);
  b->clf.reg(b->ps);
  return b;
}

std::unique_ptr<SspBundle> ssp_bundle_from(const Checkpoint& ck) {
  auto b = make_ssp_bundle(pipe_from_meta(ck),
                           std::stoull(ck.meta_or("seed", "0")));
  load_into(ck, b->ps);
  return b;
}

std::unique_ptr<EsspBundle> make_essp_bundle(const models::PipelineOptions& pipe,
                                             std::uint64_t seed) {
  auto b = std::make_unique<EsspBundle>();
  b->pipe = pipe;
  b->seed = seed;
  SplitMix64 rng = derive_rng(seed, {kTagInit});
  b->clf.init(models::pipeline_channels(pipe), rng);
  b->perc.init(rng);
  b->emb.init(rng);
  b->unet.init(rng);
  b->clf.reg(b->ps);
  b->perc.reg(b->ps);
  b->emb.reg(b->ps);
  b->unet.reg(b->ps);
  b->perc.reg(b->front);
  b->emb.reg(b->front);
  b->unet.reg(b->front);
  return b;
}

std::unique_ptr<EsspBundle> essp_bundle_from(const Checkpoint& ck) {
  auto b = make_essp_bundle(pipe_from_meta(ck),
                            std::stoull(ck.meta_or("seed", "0")));
  load_into(ck, b->ps);
  return b;
}

Checkpoint train_ssp(const std::vector<Sample>& trainset, const TrainConfig& cfg) {
  require_both_classes(trainset, "train_ssp");
  const int n = static_cast<int>(trainset.size());
  const int side = cfg.pipe.image_size;

  auto bundle = make_ssp_bundle(cfg.pipe, cfg.seed);
  ad::Adam<float> opt(bundle->ps.trainable(), static_cast<float>(cfg.lr));

  const std::vector<Image> images = cache_resized(trainset, side);
  std::vector<float> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = trainset[i].label == Label::real ? 1.0f : 0.0f;

  const int channels = models::pipeline_channels(cfg.pipe);
  const size_t sample_sz = static_cast<size_t>(channels) * side * side;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(n, cfg.seed, epoch);
    double loss_sum = 0;
    for (int start = 0; start < n; start += cfg.batch) {
      const int bs = std::min(cfg.batch, n - start);
      auto x = ad::make_tensor<float>({bs, channels, side, side});
      std::vector<float> y(bs);

      parallel_for(bs, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
          const int i = order[start + j];
          const std::uint64_t e64 = static_cast<std::uint64_t>(epoch);
          const std::uint64_t i64 = static_cast<std::uint64_t>(i);
          auto patches = models::select_patches(
              images[i], cfg.pipe, derive_rng(cfg.seed, {kTagCrop, e64, i64}).state);
          SplitMix64 aug_rng = derive_rng(cfg.seed, {kTagAug, e64, i64});
          for (auto& p : patches)
            p = augment_patch(p, cfg.aug, aug_rng).first;
          const auto planes = models::pipeline_input(patches, cfg.pipe);
          std::memcpy(x->value.data() + static_cast<size_t>(j) * sample_sz,
                      planes->value.data(), sample_sz * sizeof(float));
          y[j] = labels[i];
        }
      });

      models::Tape tape;
      const auto prob = bundle->clf.forward(tape, x, true);
      const auto loss = tape.bce_loss(prob, y);
      tape.backward(loss);
      opt.step();
      loss_sum += static_cast<double>(loss->value[0]) * bs;
    }
    if (cfg.verbose)
      log_epoch({{"epoch", epoch}, {"loss", loss_sum / n}, {"wall_s", wall_since(t0)}});
  }
  return checkpoint_from(bundle->ps, train_meta(cfg, "ssp"));
}

Checkpoint train_essp(const std::vector<Sample>& trainset, const Checkpoint& ssp_ck,
                      const TrainConfig& cfg) {
  require_both_classes(trainset, "train_essp");
  const int n = static_cast<int>(trainset.size());

  // geometry comes from the classifier checkpoint; the perception flag is
  // the caller's choice
  models::PipelineOptions pipe = pipe_from_meta(ssp_ck);
  pipe.use_perception = cfg.pipe.use_perception;
  const bool use_perc = pipe.use_perception;

  auto bundle = make_essp_bundle(pipe, cfg.seed);
  {
    // frozen classifier weights ride along for the full-pipe checkpoint
    models::ParamSet clf_only;
    bundle->clf.reg(clf_only);
    load_into(ssp_ck, clf_only);
  }

  std::vector<ad::TensorPtr<float>> trainables;
  for (const auto& [name, t] : bundle->front.tensors)
    if (use_perc || name.rfind("perc.", 0) != 0) trainables.push_back(t);
  ad::Adam<float> opt(trainables, static_cast<float>(cfg.lr));

  const std::vector<Image> images = cache_resized(trainset, pipe.image_size);
  const int m = pipe.patch_size;
  const size_t patch_sz = static_cast<size_t>(3) * m * m;
  models::PipelineOptions patch_pipe = pipe;
  patch_pipe.topk = 1;  // enhancement trains on the single simplest patch
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(n, cfg.seed, epoch);
    double recon_sum = 0, perc_sum = 0;
    for (int start = 0; start < n; start += cfg.batch) {
      const int bs = std::min(cfg.batch, n - start);
      auto x_deg = ad::make_tensor<float>({bs, 3, m, m});
      auto x_tgt = ad::make_tensor<float>({bs, 3, m, m});
      auto w_hat = ad::make_tensor<float>({bs, 3});

      parallel_for(bs, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
          const int i = order[start + j];
          const std::uint64_t e64 = static_cast<std::uint64_t>(epoch);
          const std::uint64_t i64 = static_cast<std::uint64_t>(i);
          auto patches = models::select_patches(
              images[i], patch_pipe, derive_rng(cfg.seed, {kTagCrop, e64, i64}).state);
          const Patch& clean = patches[0];
          SplitMix64 aug_rng = derive_rng(cfg.seed, {kTagAug, e64, i64});
          auto [degraded, onehot] = augment_patch(clean, cfg.aug, aug_rng);

          const auto clean_t = models::patches_to_tensor({clean});
          const auto deg_t = models::patches_to_tensor({degraded});
          std::memcpy(x_tgt->value.data() + static_cast<size_t>(j) * patch_sz,
                      clean_t->value.data(), patch_sz * sizeof(float));
          std::memcpy(x_deg->value.data() + static_cast<size_t>(j) * patch_sz,
                      deg_t->value.data(), patch_sz * sizeof(float));
          for (int c = 0; c < 3; ++c) w_hat->value[static_cast<size_t>(j) * 3 + c] = onehot[c];
        }
      });

      models::Tape tape;
      models::P h_fus, w_raw;
      if (use_perc) {
        w_raw = bundle->perc.forward(tape, x_deg, true);
        h_fus = models::fuse_embeddings(tape, models::normalize_weights(tape, w_raw),
                                        bundle->emb.table);
      } else {
        h_fus = tape.repeat_row(bundle->emb.table, 2, bs);
      }
      const auto restored = bundle->unet.forward(tape, x_deg, h_fus, true);
      const auto recon = tape.mse_loss(restored, x_tgt);
      models::P loss = recon;
      double perc_val = 0;
      if (use_perc) {
        const auto perc_term = tape.mse_loss(w_raw, w_hat);
        perc_val = perc_term->value[0];
        loss = tape.add(recon, perc_term);
      }
      tape.backward(loss);
      opt.step();
      recon_sum += static_cast<double>(recon->value[0]) * bs;
      perc_sum += perc_val * bs;
    }
    if (cfg.verbose)
      log_epoch({{"epoch", epoch},
                 {"recon", recon_sum / n},
                 {"perc", perc_sum / n},
                 {"wall_s", wall_since(t0)}});
  }

  TrainConfig resolved = cfg;
  resolved.pipe = pipe;
  return checkpoint_from(bundle->ps, train_meta(resolved, "essp"));
}

}  // namespace patchprint
