#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "patchprint/checkpoint.hpp"
#include "patchprint/dataset.hpp"
#include "patchprint/degrade.hpp"
#include "patchprint/errors.hpp"
#include "patchprint/evaluate.hpp"
#include "patchprint/image_io.hpp"
#include "patchprint/metrics.hpp"
#include "patchprint/models.hpp"
#include "patchprint/patch.hpp"
#include "patchprint/rng.hpp"
#include "patchprint/srm.hpp"
#include "patchprint/train.hpp"

namespace pp = patchprint;

namespace {

constexpr std::uint64_t kTagScore = 6;

struct PipeFlags {
  int image_size = 256;
  int patch = 32;
  int crops = 64;
  int topk = 1;
  std::string select = "simplest";
  bool no_srm = false;
};

void add_pipe_flags(CLI::App* cmd, PipeFlags& pf) {
  cmd->add_option("--image-size", pf.image_size, "working resolution")->check(CLI::Range(8, 4096));
  cmd->add_option("--patch", pf.patch, "patch side length")->check(CLI::Range(2, 1024));
  cmd->add_option("--crops", pf.crops, "candidate crops per image")->check(CLI::Range(1, 100000));
  cmd->add_option("--topk", pf.topk, "stack the k simplest patches")->check(CLI::Range(1, 64));
  cmd->add_option("--select", pf.select, "patch choice: simplest or complex")
      ->check(CLI::IsMember({"simplest", "complex"}));
  cmd->add_flag("--no-srm", pf.no_srm, "feed raw patches instead of noise residuals");
}

pp::models::PipelineOptions to_pipe(const PipeFlags& pf) {
  pp::models::PipelineOptions p;
  p.image_size = pf.image_size;
  p.patch_size = pf.patch;
  p.crops = pf.crops;
  p.topk = pf.topk;
  p.select = pf.select == "complex" ? pp::SelectMode::most_complex : pp::SelectMode::simplest;
  p.use_srm = !pf.no_srm;
  return p;
}

struct TrainFlags {
  int epochs = 5;
  int batch = 8;
  double lr = 2e-3;
  double aug_prob = 0.1;
  double sigma_min = 0.0, sigma_max = 1.0;
  int qf_min = 90, qf_max = 100;
  std::uint64_t seed = 0;
  bool quiet = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& tf) {
  cmd->add_option("--epochs", tf.epochs)->check(CLI::Range(1, 100000));
  cmd->add_option("--batch", tf.batch)->check(CLI::Range(1, 4096));
  cmd->add_option("--lr", tf.lr, "Adam learning rate");
  cmd->add_option("--aug-prob", tf.aug_prob, "chance of blur; same chance of compression")
      ->check(CLI::Range(0.0, 0.5));
  cmd->add_option("--sigma-min", tf.sigma_min);
  cmd->add_option("--sigma-max", tf.sigma_max);
  cmd->add_option("--qf-min", tf.qf_min)->check(CLI::Range(1, 100));
  cmd->add_option("--qf-max", tf.qf_max)->check(CLI::Range(1, 100));
  cmd->add_option("--seed", tf.seed);
  cmd->add_flag("--quiet", tf.quiet, "suppress per-epoch logs");
}

pp::TrainConfig to_train_config(const TrainFlags& tf, const PipeFlags& pf) {
  pp::TrainConfig cfg;
  cfg.epochs = tf.epochs;
  cfg.batch = tf.batch;
  cfg.lr = tf.lr;
  cfg.aug.probability = tf.aug_prob;
  cfg.aug.sigma_min = tf.sigma_min;
  cfg.aug.sigma_max = tf.sigma_max;
  cfg.aug.quality_min = tf.qf_min;
  cfg.aug.quality_max = tf.qf_max;
  cfg.seed = tf.seed;
  cfg.pipe = to_pipe(pf);
  cfg.verbose = !tf.quiet;
  return cfg;
}

std::string resolve_mode(const std::string& flag, const pp::Checkpoint& ck) {
  if (!flag.empty()) return flag;
  return ck.meta_or("mode", "ssp");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pp::IoError("cannot open for write: " + path);
  out << text;
  if (!out) throw pp::IoError("write failed: " + path);
}

// signed residual to gray: 0.5 + r / (2 max|r|)
pp::Image residual_to_gray(const pp::NoiseFingerprint& fp, int k) {
  float peak = 0;
  pp::Image img(fp.height, fp.width, 1);
  for (int y = 0; y < fp.height; ++y)
    for (int x = 0; x < fp.width; ++x) peak = std::max(peak, std::abs(fp.at(k, y, x)));
  for (int y = 0; y < fp.height; ++y)
    for (int x = 0; x < fp.width; ++x)
      img.at(y, x, 0) = peak > 0 ? 0.5f + fp.at(k, y, x) / (2.0f * peak) : 0.5f;
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-simple-patch image forensics toolkit"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  std::string synth_out;
  int synth_n = 200;
  std::uint64_t synth_seed = 0;
  double synth_sigma = 2.0 / 255.0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n", synth_n, "images per class")->check(CLI::Range(1, 1000000));
  synth->add_option("--seed", synth_seed);
  synth->add_option("--sensor-sigma", synth_sigma, "sensor noise std of the real class");
  synth->callback([&] {
    const std::string manifest = pp::make_synthetic_corpus(synth_out, synth_n, synth_seed, synth_sigma);
    std::printf("%s\n", manifest.c_str());
  });

  // ---- train-ssp ----
  auto* tssp = app.add_subcommand("train-ssp", "train the patch classifier");
  std::string tssp_manifest, tssp_out;
  TrainFlags tssp_tf;
  PipeFlags tssp_pf;
  tssp->add_option("--manifest", tssp_manifest)->required();
  tssp->add_option("--out", tssp_out, "checkpoint path")->required();
  add_train_flags(tssp, tssp_tf);
  add_pipe_flags(tssp, tssp_pf);
  tssp->callback([&] {
    const auto samples = pp::filter_split(pp::load_manifest(tssp_manifest), pp::Split::train);
    const auto ck = pp::train_ssp(samples, to_train_config(tssp_tf, tssp_pf));
    pp::save_checkpoint(ck, tssp_out);
  });

  // ---- train-essp ----
  auto* tessp = app.add_subcommand("train-essp", "train the enhancement front-end");
  std::string tessp_manifest, tessp_ssp, tessp_out;
  TrainFlags tessp_tf;
  // balanced thirds of blur / compression / intact so the perception head
  // sees every degradation class equally often
  tessp_tf.aug_prob = 1.0 / 3.0;
  bool tessp_noperc = false;
  tessp->add_option("--manifest", tessp_manifest)->required();
  tessp->add_option("--ssp", tessp_ssp, "classifier checkpoint")->required();
  tessp->add_option("--out", tessp_out, "checkpoint path")->required();
  add_train_flags(tessp, tessp_tf);
  tessp->add_flag("--no-perception", tessp_noperc,
                  "condition on the reconstruct embedding instead of perception");
  tessp->callback([&] {
    const auto samples = pp::filter_split(pp::load_manifest(tessp_manifest), pp::Split::train);
    auto cfg = to_train_config(tessp_tf, PipeFlags{});
    cfg.pipe.use_perception = !tessp_noperc;
    const auto ssp_ck = pp::load_checkpoint(tessp_ssp);
    const auto ck = pp::train_essp(samples, ssp_ck, cfg);
    pp::save_checkpoint(ck, tessp_out);
  });

  // ---- score ----
  auto* score = app.add_subcommand("score", "probability that one image is real");
  std::string score_ckpt, score_image, score_mode;
  score->add_option("--ckpt", score_ckpt)->required();
  score->add_option("--image", score_image)->required();
  score->add_option("--mode", score_mode)->check(CLI::IsMember({"ssp", "essp"}));
  score->callback([&] {
    const auto ck = pp::load_checkpoint(score_ckpt);
    const pp::Image img = pp::load_image(score_image);
    const std::uint64_t seed = std::stoull(ck.meta_or("seed", "0"));
    const std::uint64_t crop_seed = pp::derive_rng(seed, {kTagScore}).state;
    float s;
    if (resolve_mode(score_mode, ck) == "essp") {
      auto b = pp::essp_bundle_from(ck);
      s = pp::score_essp(*b, img, crop_seed);
    } else {
      auto b = pp::ssp_bundle_from(ck);
      s = pp::score_ssp(*b, img, crop_seed);
    }
    std::printf("%.6f\n", static_cast<double>(s));
  });

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "metrics over a manifest");
  std::string eval_ckpt, eval_manifest, eval_mode, eval_report, eval_split = "test";
  double eval_blur = 0.0;
  int eval_jpeg = 0;
  std::uint64_t eval_seed = 0;
  eval->add_option("--ckpt", eval_ckpt)->required();
  eval->add_option("--manifest", eval_manifest)->required();
  eval->add_option("--mode", eval_mode)->check(CLI::IsMember({"ssp", "essp"}));
  auto* ob = eval->add_option("--blur", eval_blur, "gaussian sigma applied to whole images");
  auto* oj = eval->add_option("--jpeg", eval_jpeg, "compression quality applied to whole images")
                 ->check(CLI::Range(1, 100));
  ob->excludes(oj);
  oj->excludes(ob);
  eval->add_option("--report", eval_report, "JSON report path")->required();
  eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_option("--seed", eval_seed);
  eval->callback([&] {
    auto samples = pp::load_manifest(eval_manifest);
    if (eval_split != "all")
      samples = pp::filter_split(samples,
                                 eval_split == "train" ? pp::Split::train : pp::Split::test);
    pp::EvalDegradation deg;
    if (ob->count() > 0) {
      deg.has_blur = true;
      deg.sigma = eval_blur;
    }
    if (oj->count() > 0) {
      deg.has_jpeg = true;
      deg.qf = eval_jpeg;
    }
    const auto ck = pp::load_checkpoint(eval_ckpt);
    const std::string mode = resolve_mode(eval_mode, ck);
    pp::Metrics m;
    if (mode == "essp") {
      auto b = pp::essp_bundle_from(ck);
      m = pp::evaluate_essp(samples, *b, deg, eval_seed);
    } else {
      auto b = pp::ssp_bundle_from(ck);
      m = pp::evaluate_ssp(samples, *b, deg, eval_seed);
    }
    std::map<std::string, std::string> extra;
    extra["mode"] = mode;
    extra["split"] = eval_split;
    extra["degradation"] = deg.has_blur  ? "blur:" + std::to_string(deg.sigma)
                           : deg.has_jpeg ? "jpeg:" + std::to_string(deg.qf)
                                          : "none";
    const std::string body = pp::metrics_to_json(m, extra);
    write_text(eval_report, body);
    std::fputs(body.c_str(), stdout);
  });

  // ---- inspect ----
  auto* inspect = app.add_subcommand("inspect", "dump the chosen patch and its residual planes");
  std::string ins_image, ins_out;
  std::uint64_t ins_seed = 0;
  PipeFlags ins_pf;
  inspect->add_option("--image", ins_image)->required();
  inspect->add_option("--out", ins_out, "output directory")->required();
  inspect->add_option("--seed", ins_seed);
  add_pipe_flags(inspect, ins_pf);
  inspect->callback([&] {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(ins_out, ec);
    if (ec) throw pp::IoError("cannot create " + ins_out);
    auto pipe = to_pipe(ins_pf);
    pipe.topk = 1;
    const auto patches = pp::models::extract_patches(pp::load_image(ins_image), pipe, ins_seed);
    const pp::Patch& p = patches[0];
    pp::save_png(p.pixels, (fs::path(ins_out) / "patch.png").string());
    const pp::Image up = pp::upsample_patch(p, pipe.image_size);
    const auto fp = pp::extract_fingerprint(up);
    for (int k = 0; k < pp::SrmKernelBank::kCount; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "residual_%d.png", k);
      pp::save_png(residual_to_gray(fp, k), (fs::path(ins_out) / name).string());
    }
    std::printf("{\"origin_row\":%d,\"origin_col\":%d,\"diversity\":%.9g}\n", p.origin_row,
                p.origin_col, pp::texture_diversity(p).value);
  });

  // ---- degrade ----
  auto* degrade = app.add_subcommand("degrade", "blur or compress one image");
  std::string deg_image, deg_out;
  double deg_sigma = 0.0;
  int deg_qf = 0;
  degrade->add_option("--image", deg_image)->required();
  degrade->add_option("--out", deg_out)->required();
  auto* ds = degrade->add_option("--sigma", deg_sigma, "gaussian blur std");
  auto* dq = degrade->add_option("--qf", deg_qf, "compression quality")->check(CLI::Range(1, 100));
  ds->excludes(dq);
  dq->excludes(ds);
  degrade->callback([&] {
    if (ds->count() == 0 && dq->count() == 0)
      throw CLI::RequiredError("one of --sigma/--qf");
    const pp::Image img = pp::load_image(deg_image);
    const pp::Image out =
        ds->count() > 0 ? pp::gaussian_blur(img, deg_sigma) : pp::jpeg_compress(img, deg_qf);
    pp::save_png(out, deg_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const pp::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
