#include "patchprint/models.hpp"

#include <cmath>

#include "patchprint/errors.hpp"
#include "patchprint/srm.hpp"

namespace patchprint::models {
namespace {

P he_tensor(const std::vector<int>& shape, int fan_in, SplitMix64& rng) {
  auto t = ad::make_tensor<float>(shape, true);
  const double std = std::sqrt(2.0 / fan_in);
  for (auto& v : t->value) v = static_cast<float>(rng.gaussian() * std);
  return t;
}

P zeros_tensor(const std::vector<int>& shape, float fill = 0.0f) {
  auto t = ad::make_tensor<float>(shape, true);
  std::fill(t->value.begin(), t->value.end(), fill);
  return t;
}

}  // namespace

// ---- layers ----

void Conv2d::init(int cin, int cout, int k, SplitMix64& rng, int stride_, int pad_) {
  stride = stride_;
  pad = pad_;
  w = he_tensor({cout, cin, k, k}, cin * k * k, rng);
  b = zeros_tensor({cout});
}

void Conv2d::reg(ParamSet& ps, const std::string& prefix) const {
  ps.add(prefix + ".w", w);
  ps.add(prefix + ".b", b);
}

void ConvTranspose2d::init(int cin, int cout, int k, SplitMix64& rng) {
  stride = k;
  w = he_tensor({cin, cout, k, k}, cin * k * k, rng);
  b = zeros_tensor({cout});
}

void ConvTranspose2d::reg(ParamSet& ps, const std::string& prefix) const {
  ps.add(prefix + ".w", w);
  ps.add(prefix + ".b", b);
}

void BatchNorm2d::init(int channels) {
  gamma = zeros_tensor({channels}, 1.0f);
  beta = zeros_tensor({channels});
  state = ad::BatchNormState<float>(channels);
}

void BatchNorm2d::reg(ParamSet& ps, const std::string& prefix) {
  ps.add(prefix + ".gamma", gamma);
  ps.add(prefix + ".beta", beta);
  ps.add_buffer(prefix + ".running_mean", &state.running_mean);
  ps.add_buffer(prefix + ".running_var", &state.running_var);
}

void Linear::init(int din, int dout, SplitMix64& rng) {
  w = he_tensor({din, dout}, din, rng);
  b = zeros_tensor({dout});
}

void Linear::reg(ParamSet& ps, const std::string& prefix) const {
  ps.add(prefix + ".w", w);
  ps.add(prefix + ".b", b);
}

void ConvBnRelu::init(int cin, int cout, SplitMix64& rng) {
  conv.init(cin, cout, 3, rng, 1, 1);
  bn.init(cout);
}

void ConvBnRelu::reg(ParamSet& ps, const std::string& prefix) {
  conv.reg(ps, prefix + ".conv");
  bn.reg(ps, prefix + ".bn");
}

void CondSite::init(int d_emb, int channels, SplitMix64& rng) {
  wv = he_tensor({d_emb, d_emb}, d_emb, rng);
  proj = he_tensor({d_emb, channels}, d_emb, rng);
}

void CondSite::reg(ParamSet& ps, const std::string& prefix) const {
  ps.add(prefix + ".wv", wv);
  ps.add(prefix + ".proj", proj);
}

// ---- networks ----

void SspClassifier::init(int in_ch, SplitMix64& rng) {
  in_channels = in_ch;
  b1.init(in_ch, 16, rng);
  b2.init(16, 32, rng);
  b3.init(32, 64, rng);
  b4.init(64, 64, rng);
  head.init(64, 1, rng);
}

void SspClassifier::reg(ParamSet& ps, const std::string& prefix) {
  b1.reg(ps, prefix + ".b1");
  b2.reg(ps, prefix + ".b2");
  b3.reg(ps, prefix + ".b3");
  b4.reg(ps, prefix + ".b4");
  head.reg(ps, prefix + ".head");
}

P SspClassifier::forward(Tape& t, const P& x, bool training) {
  if (x->rank() != 4 || x->dim(1) != in_channels)
    throw ShapeMismatch("classifier: wrong input channels");
  P h = t.maxpool2x2(b1(t, x, training));
  h = t.maxpool2x2(b2(t, h, training));
  h = t.maxpool2x2(b3(t, h, training));
  h = t.maxpool2x2(b4(t, h, training));
  return t.sigmoid(head(t, t.global_avg_pool(h)));
}

void PerceptionModule::init(SplitMix64& rng) {
  block.init(3, 16, rng);
  head.init(16, 3, rng);
}

void PerceptionModule::reg(ParamSet& ps, const std::string& prefix) {
  block.reg(ps, prefix + ".block");
  head.reg(ps, prefix + ".head");
}

P PerceptionModule::forward(Tape& t, const P& x, bool training) {
  if (x->rank() != 4 || x->dim(1) != 3) throw ShapeMismatch("perception: expected [N,3,h,w]");
  return t.sigmoid(head(t, t.global_avg_pool(block(t, x, training))));
}

void TaskEmbeddings::init(SplitMix64& rng) {
  table = ad::make_tensor<float>({3, kDim}, true);
  for (auto& v : table->value) v = static_cast<float>(rng.gaussian() * 0.1);
}

void TaskEmbeddings::reg(ParamSet& ps, const std::string& prefix) {
  ps.add(prefix + ".table", table);
}

P normalize_weights(Tape& t, const P& w_raw) { return t.l1_normalize_rows(w_raw); }

P fuse_embeddings(Tape& t, const P& w_norm, const P& table) { return t.matmul(w_norm, table); }

void EnhancementUnet::init(SplitMix64& rng) {
  const int d = TaskEmbeddings::kDim;
  enc1a.init(3, 32, rng);
  enc1b.init(32, 32, rng);
  site_e1.init(d, 32, rng);
  enc2a.init(32, 64, rng);
  enc2b.init(64, 64, rng);
  site_e2.init(d, 64, rng);
  mid_a.init(64, 128, rng);
  mid_b.init(128, 128, rng);
  up1.init(128, 64, 2, rng);
  dec1a.init(128, 64, rng);
  dec1b.init(64, 64, rng);
  site_d1.init(d, 64, rng);
  up2.init(64, 32, 2, rng);
  dec2a.init(64, 32, rng);
  dec2b.init(32, 32, rng);
  site_d2.init(d, 32, rng);
  out_conv.init(32, 3, 3, rng, 1, 1);
}

void EnhancementUnet::reg(ParamSet& ps, const std::string& prefix) {
  enc1a.reg(ps, prefix + ".enc1a");
  enc1b.reg(ps, prefix + ".enc1b");
  site_e1.reg(ps, prefix + ".site_e1");
  enc2a.reg(ps, prefix + ".enc2a");
  enc2b.reg(ps, prefix + ".enc2b");
  site_e2.reg(ps, prefix + ".site_e2");
  mid_a.reg(ps, prefix + ".mid_a");
  mid_b.reg(ps, prefix + ".mid_b");
  up1.reg(ps, prefix + ".up1");
  dec1a.reg(ps, prefix + ".dec1a");
  dec1b.reg(ps, prefix + ".dec1b");
  site_d1.reg(ps, prefix + ".site_d1");
  up2.reg(ps, prefix + ".up2");
  dec2a.reg(ps, prefix + ".dec2a");
  dec2b.reg(ps, prefix + ".dec2b");
  site_d2.reg(ps, prefix + ".site_d2");
  out_conv.reg(ps, prefix + ".out");
}

P EnhancementUnet::forward(Tape& t, const P& x, const P& h_fus, bool training) {
  if (x->rank() != 4 || x->dim(1) != 3) throw ShapeMismatch("unet: expected [N,3,h,w]");
  if (x->dim(2) % 4 != 0 || x->dim(3) % 4 != 0)
    throw ShapeMismatch("unet: spatial dims must be divisible by 4");
  P e1 = site_e1(t, enc1b(t, enc1a(t, x, training), training), h_fus);
  P e2 = site_e2(t, enc2b(t, enc2a(t, t.maxpool2x2(e1), training), training), h_fus);
  P m = mid_b(t, mid_a(t, t.maxpool2x2(e2), training), training);
  P d1 = t.concat_channels(up1(t, m), e2);
  d1 = site_d1(t, dec1b(t, dec1a(t, d1, training), training), h_fus);
  P d2 = t.concat_channels(up2(t, d1), e1);
  d2 = site_d2(t, dec2b(t, dec2a(t, d2, training), training), h_fus);
  return t.sigmoid(out_conv(t, d2));
}

// ---- pipeline ----

int pipeline_channels(const PipelineOptions& opts) { return 3 * std::max(1, opts.topk); }

std::vector<Patch> select_patches(const Image& resized_rgb, const PipelineOptions& opts,
                                  std::uint64_t crop_seed) {
  auto candidates = crop_patches(resized_rgb, opts.patch_size, opts.crops, crop_seed);
  std::vector<Patch> picked;
  if (opts.topk <= 1) {
    picked.push_back(candidates[select_patch_index(candidates, opts.select)]);
  } else {
    for (const auto idx : select_top_k_indices(candidates, opts.topk))
      picked.push_back(candidates[idx]);
  }
  return picked;
}

std::vector<Patch> extract_patches(const Image& img, const PipelineOptions& opts,
                                   std::uint64_t crop_seed) {
  const Image rgb = ensure_rgb(img);
  const Image resized = resize_bilinear(rgb, opts.image_size, opts.image_size);
  return select_patches(resized, opts, crop_seed);
}

P pipeline_input(const std::vector<Patch>& patches, const PipelineOptions& opts) {
  const int S = opts.image_size;
  const int per = 3;  // channels contributed per patch, both srm and raw
  auto out = ad::make_tensor<float>(
      {1, per * static_cast<int>(patches.size()), S, S});
  const size_t plane = static_cast<size_t>(S) * S;
  for (size_t p = 0; p < patches.size(); ++p) {
    const Image up = upsample_patch(patches[p], S);
    if (opts.use_srm) {
      const NoiseFingerprint fp = extract_fingerprint(up);
      std::copy(fp.data.begin(), fp.data.end(), out->value.begin() + p * per * plane);
    } else {
      for (int c = 0; c < 3; ++c) {
        float* dst = out->value.data() + (p * per + c) * plane;
        for (int y = 0; y < S; ++y)
          for (int x = 0; x < S; ++x) dst[static_cast<size_t>(y) * S + x] = up.at(y, x, c);
      }
    }
  }
  return out;
}

float ssp_forward(const Image& img, SspClassifier& clf, const PipelineOptions& opts,
                  std::uint64_t crop_seed) {
  const auto patches = extract_patches(img, opts, crop_seed);
  Tape t;
  t.set_recording(false);
  const P prob = clf.forward(t, pipeline_input(patches, opts), false);
  return prob->value[0];
}

float essp_forward(const Image& img, SspClassifier& clf, PerceptionModule& perc,
                   TaskEmbeddings& emb, EnhancementUnet& unet, const PipelineOptions& opts,
                   std::uint64_t crop_seed) {
  auto patches = extract_patches(img, opts, crop_seed);
  Tape t;
  t.set_recording(false);
  const P x = patches_to_tensor(patches);
  const int n = x->dim(0);
  P h_fus;
  if (opts.use_perception) {
    h_fus = fuse_embeddings(t, normalize_weights(t, perc.forward(t, x, false)), emb.table);
  } else {
    h_fus = t.repeat_row(emb.table, 2, n);  // reconstruct row
  }
  const P restored = unet.forward(t, x, h_fus, false);
  for (int i = 0; i < n; ++i) patches[i].pixels = tensor_row_to_image(restored, i);
  const P prob = clf.forward(t, pipeline_input(patches, opts), false);
  return prob->value[0];
}

P patches_to_tensor(const std::vector<Patch>& patches) {
  if (patches.empty()) throw EmptyInput("patches_to_tensor: no patches");
  const int m = patches[0].pixels.height;
  auto out = ad::make_tensor<float>({static_cast<int>(patches.size()), 3, m, m});
  const size_t plane = static_cast<size_t>(m) * m;
  for (size_t p = 0; p < patches.size(); ++p) {
    const Image& px = patches[p].pixels;
    if (px.height != m || px.width != m || px.channels != 3)
      throw ShapeMismatch("patches_to_tensor: mixed or non-rgb patches");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < m; ++y)
        for (int x = 0; x < m; ++x)
          out->value[(p * 3 + c) * plane + static_cast<size_t>(y) * m + x] = px.at(y, x, c);
  }
  return out;
}

Image tensor_row_to_image(const P& t, int row) {
  if (t->rank() != 4) throw ShapeMismatch("tensor_row_to_image: expected [N,C,H,W]");
  const int C = t->dim(1), H = t->dim(2), W = t->dim(3);
  Image img(H, W, C);
  const size_t plane = static_cast<size_t>(H) * W;
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        img.at(y, x, c) =
            t->value[(static_cast<size_t>(row) * C + c) * plane + static_cast<size_t>(y) * W + x];
  return img;
}

}  // namespace patchprint::models
