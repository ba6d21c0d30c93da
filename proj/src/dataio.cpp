#include "twincount/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "twincount/errors.hpp"

namespace twincount {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

Domain domain_from_string(const std::string& s) {
  if (s == "nat") return Domain::nat;
  if (s == "syn") return Domain::syn;
  throw ValidationError("unknown domain: " + s);
}

DatasetManifest load_dataset(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.csv";
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open " + manifest_path);

  DatasetManifest manifest;
  manifest.dir = dir;

  std::string line;
  if (!std::getline(f, line))
    throw ValidationError(manifest_path + ": empty manifest");
  if (strip_cr(line) != "filename,count,domain,seed")
    throw ValidationError(manifest_path +
                          ": expected header filename,count,domain,seed");

  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    const std::string where = manifest_path + " row " + std::to_string(row);
    if (fields.size() != 4)
      throw ValidationError(where + ": expected 4 fields, got " +
                            std::to_string(fields.size()));

    Sample s;
    s.id = fields[0];
    if (s.id.empty()) throw ValidationError(where + ": empty filename");

    if (!fields[1].empty()) {
      int count = 0;
      const auto [p, ec] =
          std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), count);
      if (ec != std::errc() || p != fields[1].data() + fields[1].size())
        throw ValidationError(where + ": malformed count '" + fields[1] + "'");
      if (count < 1 || count > 30)
        throw ValidationError(where + ": count " + std::to_string(count) +
                              " outside [1,30]");
      s.label = count;
    }

    try {
      s.domain = domain_from_string(fields[2]);
    } catch (const ValidationError&) {
      throw ValidationError(where + ": unknown domain '" + fields[2] + "'");
    }

    if (!fields[3].empty()) {
      uint64_t seed = 0;
      const auto [p, ec] =
          std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), seed);
      if (ec != std::errc() || p != fields[3].data() + fields[3].size())
        throw ValidationError(where + ": malformed seed '" + fields[3] + "'");
      s.seed = seed;
    }

    const std::string img_path = dir + "/" + s.id;
    if (!std::filesystem::exists(img_path))
      throw ValidationError(where + ": missing image file " + s.id);
    s.image = read_png(img_path);
    if (!s.image.is_working_resolution())
      throw ValidationError(where + ": image " + s.id + " is " +
                            std::to_string(s.image.width) + "x" +
                            std::to_string(s.image.height) + ", expected 128x128");
    manifest.samples.push_back(std::move(s));
  }
  return manifest;
}

void AugmentConfig::validate() const {
  if (hflip_prob < 0 || hflip_prob > 1 || vflip_prob < 0 || vflip_prob > 1)
    throw ValidationError("flip probabilities must lie in [0,1]");
  if (crop_scale <= 0 || crop_scale > 1)
    throw ValidationError("crop_scale must lie in (0,1]");
  if (noise_amplitude < 0 || noise_amplitude > 1)
    throw ValidationError("noise_amplitude must lie in [0,1]");
}

Image augment(const Image& image, const AugmentConfig& config, Rng& rng) {
  Image out = image;
  if (rng.bernoulli(config.hflip_prob)) out = flip_horizontal(out);
  if (rng.bernoulli(config.vflip_prob)) out = flip_vertical(out);

  const int side = static_cast<int>(std::floor(kImageSize * config.crop_scale));
  if (side < kImageSize) {
    const int ox = rng.uniform_int(0, kImageSize - side);
    const int oy = rng.uniform_int(0, kImageSize - side);
    out = resize_bilinear(crop(out, ox, oy, side, side), kImageSize, kImageSize);
  }

  if (config.rot90) out = rotate90(out, rng.uniform_int(0, 3));

  if (config.noise_amplitude > 0) {
    for (auto& p : out.pixels)
      p = static_cast<float>(
          p + rng.uniform(-config.noise_amplitude, config.noise_amplitude));
  }
  clamp01(out);
  return out;
}

Batch pack_batch(const DatasetManifest& manifest, const std::vector<size_t>& idx) {
  Batch b;
  b.size = static_cast<int>(idx.size());
  b.images.resize(b.size, 1, kImageSize, kImageSize);
  b.labels.resize(idx.size());
  if (!idx.empty()) b.domain = manifest.samples[idx[0]].domain;
  for (size_t i = 0; i < idx.size(); ++i) {
    const Sample& s = manifest.samples[idx[i]];
    b.labels[i] = s.label;
    std::copy(s.image.pixels.begin(), s.image.pixels.end(),
              b.images.ptr(static_cast<int>(i)));
  }
  return b;
}

std::vector<Batch> make_batches(const DatasetManifest& manifest, int batch_size,
                                Rng& rng, const AugmentConfig* augment_cfg) {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (manifest.empty()) throw ValidationError("cannot batch an empty manifest");
  if (augment_cfg) augment_cfg->validate();

  std::vector<size_t> order(manifest.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Fisher-Yates with our own stream
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);

  const uint64_t aug_base = rng.next_u64();

  std::vector<Batch> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    const size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.size = static_cast<int>(end - start);
    b.images.resize(b.size, 1, kImageSize, kImageSize);
    b.labels.resize(b.size);
    b.domain = manifest.samples[order[start]].domain;
    for (size_t i = start; i < end; ++i) {
      const Sample& s = manifest.samples[order[i]];
      const int pos = static_cast<int>(i - start);
      b.labels[pos] = s.label;
      if (augment_cfg) {
        Rng draw_rng(derive_seed(aug_base, 0xA6, i));
        const Image img = augment(s.image, *augment_cfg, draw_rng);
        std::copy(img.pixels.begin(), img.pixels.end(), b.images.ptr(pos));
      } else {
        std::copy(s.image.pixels.begin(), s.image.pixels.end(), b.images.ptr(pos));
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace twincount
