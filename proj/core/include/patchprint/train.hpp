#pragma once

#include <memory>
#include <string>
#include <vector>

#include "patchprint/checkpoint.hpp"
#include "patchprint/dataset.hpp"
#include "patchprint/degrade.hpp"
#include "patchprint/models.hpp"

namespace patchprint {

// Defaults are the desk profile: small batches keep the step count high
// enough for the batch-norm running stats to settle within a few epochs.
struct TrainConfig {
  int epochs = 5;
  int batch = 8;
  double lr = 2e-3;
  DegradationConfig aug;  // probability + parameter ranges
  std::uint64_t seed = 0;
  models::PipelineOptions pipe;
  bool verbose = true;  // one JSON line per epoch on stdout
};

// A classifier plus the pipeline options its checkpoint was trained with.
// ParamSet pointers reference this object, so bundles live on the heap and
// never move.
struct SspBundle {
  models::SspClassifier clf;
  models::PipelineOptions pipe;
  std::uint64_t seed = 0;
  models::ParamSet ps;
};

std::unique_ptr<SspBundle> make_ssp_bundle(const models::PipelineOptions& pipe,
                                           std::uint64_t seed);
std::unique_ptr<SspBundle> ssp_bundle_from(const Checkpoint& ck);

// The full enhanced pipeline: frozen classifier plus the trainable
// front-end. `front` holds only what essp training updates.
struct EsspBundle {
  models::SspClassifier clf;
  models::PerceptionModule perc;
  models::TaskEmbeddings emb;
  models::EnhancementUnet unet;
  models::PipelineOptions pipe;
  std::uint64_t seed = 0;
  models::ParamSet ps;     // everything, for checkpoints
  models::ParamSet front;  // perception + embeddings + unet
};

std::unique_ptr<EsspBundle> make_essp_bundle(const models::PipelineOptions& pipe,
                                             std::uint64_t seed);
std::unique_ptr<EsspBundle> essp_bundle_from(const Checkpoint& ck);

// Pipeline options round-trip through checkpoint metadata.
std::map<std::string, std::string> pipe_meta(const models::PipelineOptions& pipe);
models::PipelineOptions pipe_from_meta(const Checkpoint& ck);

// Binary cross-entropy training of the classifier on fingerprints of
// augmented selected patches. Throws SingleClassDataset unless both labels
// appear. Fixed seed gives a bit-identical checkpoint.
Checkpoint train_ssp(const std::vector<Sample>& trainset, const TrainConfig& cfg);

// Enhancement training against reconstruction + perception MSE (the
// classifier rides along frozen, copied from ssp_ck, and defines the
// pipeline geometry). With use_perception off the perception module and
// its loss term are dropped and conditioning uses the reconstruct row.
Checkpoint train_essp(const std::vector<Sample>& trainset, const Checkpoint& ssp_ck,
                      const TrainConfig& cfg);

// Deterministic epoch shuffle (Fisher-Yates over a derived stream);
// exposed for tests.
std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch);

}  // namespace patchprint
