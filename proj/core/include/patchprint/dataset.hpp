#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace patchprint {

enum class Label { real, fake };
enum class Split { train, test };

struct Sample {
  std::string path;  // resolved against the manifest's directory
  Label label = Label::real;
  std::string generator;
  Split split = Split::train;
};

// JSON-lines manifest, one object per line with keys path, label
// (real|fake), generator, split (train|test). Blank lines are skipped.
// Relative paths are joined to the manifest's directory. Order preserved,
// duplicates allowed. ParseError/UnknownLabel messages carry the line
// number.
std::vector<Sample> load_manifest(const std::string& path);

void save_manifest(const std::vector<Sample>& samples, const std::string& path);

std::vector<Sample> filter_split(const std::vector<Sample>& samples, Split split);

// Synthetic corpus: smooth random gradients; "real" adds i.i.d. Gaussian
// sensor noise of std sensor_sigma, "fake" adds the same field blurred
// until most of it is gone. 2*n_per_class PNGs under dir plus
// dir/manifest.jsonl with an 80/20 train/test split. Returns the manifest
// path. Same arguments produce byte-identical files.
std::string make_synthetic_corpus(const std::string& dir, int n_per_class, std::uint64_t seed,
                                  double sensor_sigma = 2.0 / 255.0);

}  // namespace patchprint
