#pragma once

#include <map>
#include <string>
#include <vector>

#include "patchprint/models.hpp"

namespace patchprint {

// Binary model container. Layout, all integers little-endian:
//   magic "SSPC", u32 version (1)
//   u32 meta count, then per pair: u32 key len, key bytes, u32 val len, val
//   u32 entry count, then per entry: u32 name len, name bytes,
//     u8 dtype (0 = f32), u8 rank, u32 extents[rank], f32 data[product]
// Metadata keys are sorted, entries keep registration order, so identical
// state produces identical bytes.
struct TensorEntry {
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, TensorEntry>> entries;

  const TensorEntry* find(const std::string& name) const;
  std::string meta_or(const std::string& key, const std::string& fallback) const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Snapshot every tensor and buffer of a ParamSet.
Checkpoint checkpoint_from(const models::ParamSet& ps,
                           const std::map<std::string, std::string>& meta);

// Copy checkpoint entries into an already-built ParamSet by name. Missing
// name or shape clash throws CorruptData; extra checkpoint entries are
// ignored so one file can feed several model subsets.
void load_into(const Checkpoint& ck, models::ParamSet& ps);

// FNV-1a 64 over a string, hex encoded; used for config digests.
std::string digest64(const std::string& s);

}  // namespace patchprint
