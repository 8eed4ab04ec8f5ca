#pragma once

#include <string>
#include <vector>

#include "patchprint/autodiff.hpp"
#include "patchprint/image.hpp"
#include "patchprint/patch.hpp"
#include "patchprint/rng.hpp"
#include "patchprint/tensor.hpp"

namespace patchprint::models {

using Tape = ad::Tape<float>;
using P = ad::TensorPtr<float>;

// Everything a checkpoint stores: trainable tensors plus non-trained
// buffers (batch-norm running statistics). Names are dotted paths and
// stable across runs; registration order defines file order.
struct ParamSet {
  std::vector<std::pair<std::string, P>> tensors;
  std::vector<std::pair<std::string, std::vector<float>*>> buffers;

  void add(const std::string& name, const P& t) { tensors.emplace_back(name, t); }
  void add_buffer(const std::string& name, std::vector<float>* v) {
    buffers.emplace_back(name, v);
  }
  std::vector<P> trainable() const {
    std::vector<P> out;
    out.reserve(tensors.size());
    for (const auto& [n, t] : tensors) out.push_back(t);
    return out;
  }
};

// ---- layers ----

struct Conv2d {
  P w, b;
  int stride = 1, pad = 1;

  void init(int cin, int cout, int k, SplitMix64& rng, int stride_ = 1, int pad_ = 1);
  void reg(ParamSet& ps, const std::string& prefix) const;
  P operator()(Tape& t, const P& x) const { return t.conv2d(x, w, b, stride, pad); }
};

struct ConvTranspose2d {
  P w, b;  // w[Ci,Co,k,k], k == stride
  int stride = 2;

  void init(int cin, int cout, int k, SplitMix64& rng);
  void reg(ParamSet& ps, const std::string& prefix) const;
  P operator()(Tape& t, const P& x) const { return t.conv_transpose2d(x, w, b, stride); }
};

struct BatchNorm2d {
  P gamma, beta;
  ad::BatchNormState<float> state;

  void init(int channels);
  void reg(ParamSet& ps, const std::string& prefix);
  P operator()(Tape& t, const P& x, bool training) {
    return t.batch_norm(x, gamma, beta, state, training);
  }
};

struct Linear {
  P w, b;

  void init(int din, int dout, SplitMix64& rng);
  void reg(ParamSet& ps, const std::string& prefix) const;
  P operator()(Tape& t, const P& x) const { return t.linear(x, w, b); }
};

// conv 3x3 pad 1 -> batch norm -> relu
struct ConvBnRelu {
  Conv2d conv;
  BatchNorm2d bn;

  void init(int cin, int cout, SplitMix64& rng);
  void reg(ParamSet& ps, const std::string& prefix);
  P operator()(Tape& t, const P& x, bool training) {
    return t.relu(bn(t, conv(t, x), training));
  }
};

// Per-sample channel bias derived from the conditioning vector. This is
// single-token cross-attention with the spatial map as queries: softmax
// over one key is identically 1, so the attended value is the same
// projected token for every query and the whole layer reduces to
// value-projection + broadcast add. Query/key weights would receive zero
// gradient and are omitted.
struct CondSite {
  P wv;    // [d_emb, d_emb]
  P proj;  // [d_emb, channels]

  void init(int d_emb, int channels, SplitMix64& rng);
  void reg(ParamSet& ps, const std::string& prefix) const;
  P operator()(Tape& t, const P& x, const P& h_fus) const {
    return t.add_channel_bias(x, t.matmul(t.matmul(h_fus, wv), proj));
  }
};

// ---- networks ----

// Compact CNN over the fingerprint planes: 4x (conv-bn-relu-maxpool),
// widths 16/32/64/64, global average pool, linear to one logit, sigmoid.
// Output is P(input image is real).
struct SspClassifier {
  int in_channels = 3;
  ConvBnRelu b1, b2, b3, b4;
  Linear head;

  void init(int in_ch, SplitMix64& rng);
  void reg(ParamSet& ps, const std::string& prefix = "clf");
  // x [N, in_channels, H, W] -> [N, 1] probabilities
  P forward(Tape& t, const P& x, bool training);
};

// Degradation classifier on the raw patch: conv-bn-relu, global average
// pool, linear to 3 logits, per-component sigmoid. Components order:
// [blurry, compressed, intact].
struct PerceptionModule {
  ConvBnRelu block;
  Linear head;

  void init(SplitMix64& rng);
  void reg(ParamSet& ps, const std::string& prefix = "perc");
  // x [N, 3, h, w] -> w' [N, 3], each component in (0,1)
  P forward(Tape& t, const P& x, bool training);
};

// Three learnable task vectors, one per restoration mode. Row order
// matches the perception components: blur, compress, reconstruct.
struct TaskEmbeddings {
  static constexpr int kDim = 64;
  P table;  // [3, kDim]

  void init(SplitMix64& rng);
  void reg(ParamSet& ps, const std::string& prefix = "emb");
};

// w' [N,3] raw (0,1) components -> rows normalized to sum 1.
P normalize_weights(Tape& t, const P& w_raw);

// h_fus [N, d] = w_norm [N,3] x table [3, d]; linear in both factors.
P fuse_embeddings(Tape& t, const P& w_norm, const P& table);

// Two-level U-Net, conditioning injected after every encoder/decoder
// block. Output is sigmoid-bounded to [0,1] and keeps the input shape.
struct EnhancementUnet {
  ConvBnRelu enc1a, enc1b, enc2a, enc2b, mid_a, mid_b;
  ConvBnRelu dec1a, dec1b, dec2a, dec2b;
  ConvTranspose2d up1, up2;
  Conv2d out_conv;
  CondSite site_e1, site_e2, site_d1, site_d2;

  void init(SplitMix64& rng);
  void reg(ParamSet& ps, const std::string& prefix = "unet");
  // x [N,3,h,w] with h,w divisible by 4; h_fus [N, TaskEmbeddings::kDim]
  P forward(Tape& t, const P& x, const P& h_fus, bool training);
};

// ---- pipeline ----

struct PipelineOptions {
  int image_size = 256;
  int patch_size = 32;
  int crops = 64;
  SelectMode select = SelectMode::simplest;
  int topk = 1;          // >1 stacks the k simplest fingerprints channelwise
  bool use_srm = true;   // false feeds the raw upsampled patch
  bool use_perception = true;  // essp only; false conditions on the reconstruct row
};

// Classifier input channels implied by the options.
int pipeline_channels(const PipelineOptions& opts);

// resize -> seeded crops -> select. The returned patches are raw pixels at
// patch_size; callers enhance and/or fingerprint them.
std::vector<Patch> extract_patches(const Image& img, const PipelineOptions& opts,
                                   std::uint64_t crop_seed);

// Crop + select on an already resized rgb image (the tail of
// extract_patches); training loops cache the resize.
std::vector<Patch> select_patches(const Image& resized_rgb, const PipelineOptions& opts,
                                  std::uint64_t crop_seed);

// Stack classifier input planes for pre-selected patches of one image:
// upsample each to image_size, then SRM fingerprint (or raw channels).
// Shape [1, C, image_size, image_size].
P pipeline_input(const std::vector<Patch>& patches, const PipelineOptions& opts);

// Full SSP pipe: extract -> upsample -> fingerprint -> classify.
float ssp_forward(const Image& img, SspClassifier& clf, const PipelineOptions& opts,
                  std::uint64_t crop_seed);

// Full ESSP pipe: extract -> perceive -> fuse -> enhance -> upsample ->
// fingerprint -> classify. With use_perception off, conditioning uses the
// reconstruct embedding for every sample.
float essp_forward(const Image& img, SspClassifier& clf, PerceptionModule& perc,
                   TaskEmbeddings& emb, EnhancementUnet& unet, const PipelineOptions& opts,
                   std::uint64_t crop_seed);

// Patches -> [N,3,m,m] tensor (values copied; channels-first).
P patches_to_tensor(const std::vector<Patch>& patches);

// [N,3,m,m] tensor row -> patch pixels (HWC image at patch size).
Image tensor_row_to_image(const P& t, int row);

}  // namespace patchprint::models
