#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twincount/dataio.hpp"
#include "twincount/image.hpp"

namespace twincount {

// Two visual styles per microscopy technique: plain synthetic, and a
// texture-enriched pseudo-natural look (smudges, stronger contour noise,
// contrast jitter) standing in for the natural corpus at desk scale.
enum class Style { syn_pc, syn_bf, pseudo_nat_pc, pseudo_nat_bf };

const char* to_string(Style s);
Style style_from_string(const std::string& s);
Domain style_domain(Style s);
bool style_is_pseudo_nat(Style s);
bool style_is_bright_field(Style s);

struct CellSpec {
  double center_x = 64, center_y = 64;  // pixels, continuous
  double radius_a = 6, radius_b = 6;    // semi-axes, pixels
  double rotation = 0;                  // radians
  double interior_brightness = 0.5;
  double membrane_brightness = 0.9;
  double membrane_width = 1.5;  // pixels
  double blur_sigma = 0.5;      // per-cell blur
  double deformation_amplitude = 0.05;  // contour noise, [0,1]
};

struct SceneSpec {
  std::vector<CellSpec> cells;
  int background_id = 0;
  double background_brightness_scale = 1.0;  // [0.5, 1.5]
  double noise_amplitude = 0.0;
  double global_blur_sigma = 0.0;
  std::vector<CellSpec> smudges;  // pseudo-nat styles only
  uint64_t seed = 0;

  int label() const { return static_cast<int>(cells.size()); }
};

struct OverlapPolicy {
  enum class Kind { forbid, allow };
  Kind kind = Kind::allow;
  // forbid: pairwise center distance >= factor * (r_i + r_j), r = max semi-axis
  double min_center_distance_factor = 1.2;
  // allow: circle-approximated overlap area / smaller circle area <= fraction
  double max_overlap_fraction = 0.3;
};

struct GeneratorConfig {
  Style style = Style::syn_pc;
  // histogram over counts 1..30, must sum to 1
  std::map<int, double> count_distribution;
  OverlapPolicy overlap;

  double radius_min = 4.0, radius_max = 10.0;
  double aspect_min = 0.7;  // radius_b = radius_a * U(aspect_min, 1)
  double interior_brightness_min = 0.45, interior_brightness_max = 0.65;
  double membrane_brightness_min = 0.80, membrane_brightness_max = 1.0;
  double membrane_width_min = 1.0, membrane_width_max = 2.0;
  double cell_blur_min = 0.0, cell_blur_max = 1.5;
  double deformation_min = 0.02, deformation_max = 0.12;
  double global_blur_min = 0.0, global_blur_max = 0.8;
  double noise_min = 0.0, noise_max = 0.05;
  double background_brightness_scale_min = 0.85,
         background_brightness_scale_max = 1.15;
  int background_bank_size = 8;
  int smudges_min = 2, smudges_max = 6;  // only used by pseudo-nat styles

  // style-calibrated defaults; count distribution is a truncated geometric
  // with its mode at low counts
  static GeneratorConfig defaults(Style style);

  void validate() const;  // throws ValidationError
};

// Draws a full scene description; deterministic in (config, seed). Throws
// PlacementError when rejection sampling cannot satisfy the overlap policy.
SceneSpec sample_scene(const GeneratorConfig& config, uint64_t seed);

// Rasterizes a scene; bit-identical for identical (scene, config).
Image render(const SceneSpec& scene, const GeneratorConfig& config);

// Procedural cultivation-chamber background with a darker border; id selects
// a deterministic variant from the bank.
Image build_background_procedural(Style style, int id = 0);
// Per-pixel arithmetic mean of a natural image list.
Image build_background_mean(const std::vector<Image>& images);

// Renders n images, writes PNGs + manifest.csv + scenes.json into out_dir,
// and returns the in-memory manifest. Deterministic in (config, n, seed).
DatasetManifest generate_dataset(const GeneratorConfig& config, int n,
                                 uint64_t seed, const std::string& out_dir);

}  // namespace twincount
