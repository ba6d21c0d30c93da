#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twincount/image.hpp"
#include "twincount/rng.hpp"
#include "twincount/tensor.hpp"
#include "twincount/types.hpp"

namespace twincount {

Domain domain_from_string(const std::string& s);

struct Sample {
  Image image;
  std::optional<int> label;  // cell count in [1,30] when present
  Domain domain = Domain::syn;
  std::string id;
  uint64_t seed = 0;
};

struct DatasetManifest {
  std::string dir;
  std::vector<Sample> samples;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  size_t labeled_count() const {
    size_t c = 0;
    for (const auto& s : samples) c += s.label.has_value();
    return c;
  }
};

// Reads manifest.csv + PNGs from dir; every row validated (file exists,
// 128x128, count empty or in [1,30]); errors name the row.
DatasetManifest load_dataset(const std::string& dir);

struct AugmentConfig {
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  double crop_scale = 0.9;  // random resized crop to floor(128*scale)
  bool rot90 = true;
  double noise_amplitude = 0.02;  // uniform in [-a, a]

  void validate() const;
};

// In order: horizontal flip, vertical flip, random resized crop (bilinear
// resize back to 128), random k*90deg rotation, additive zero-centered
// uniform noise, clamp.
Image augment(const Image& image, const AugmentConfig& config, Rng& rng);

struct Batch {
  Tensor<float> images;  // (N,1,128,128)
  std::vector<std::optional<int>> labels;
  Domain domain = Domain::syn;
  int size = 0;
};

// One epoch of shuffled batches; the final short batch is emitted. When an
// augment config is given it is applied per draw with per-sample streams.
std::vector<Batch> make_batches(const DatasetManifest& manifest, int batch_size,
                                Rng& rng, const AugmentConfig* augment_cfg = nullptr);

// Packs specific samples (by index) into a batch without augmentation.
Batch pack_batch(const DatasetManifest& manifest, const std::vector<size_t>& idx);

}  // namespace twincount
