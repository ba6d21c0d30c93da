#include "twincount/synthgen.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "twincount/errors.hpp"
#include "twincount/json_io.hpp"

namespace twincount {

namespace {

constexpr double kPi = 3.14159265358979323846;

double max_radius(const CellSpec& c) { return std::max(c.radius_a, c.radius_b); }

// Extent of a cell on the canvas: deformed boundary + membrane + blur support.
double cell_extent(const CellSpec& c) {
  return max_radius(c) * (1.0 + c.deformation_amplitude * 1.5) +
         c.membrane_width + 3.0 * c.blur_sigma + 1.0;
}

// Area of the lens formed by two intersecting circles.
double circle_overlap_area(double r1, double r2, double d) {
  if (d >= r1 + r2) return 0.0;
  const double rmin = std::min(r1, r2);
  if (d <= std::abs(r1 - r2)) return kPi * rmin * rmin;
  const double a1 = r1 * r1 * std::acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1));
  const double a2 = r2 * r2 * std::acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2));
  const double tri = 0.5 * std::sqrt(std::max(0.0, (-d + r1 + r2) * (d + r1 - r2) *
                                                   (d - r1 + r2) * (d + r1 + r2)));
  return a1 + a2 - tri;
}

bool placement_ok(const CellSpec& cand, const std::vector<CellSpec>& placed,
                  const OverlapPolicy& policy) {
  for (const auto& other : placed) {
    const double dx = cand.center_x - other.center_x;
    const double dy = cand.center_y - other.center_y;
    const double d = std::hypot(dx, dy);
    const double r1 = max_radius(cand);
    const double r2 = max_radius(other);
    if (policy.kind == OverlapPolicy::Kind::forbid) {
      if (d < policy.min_center_distance_factor * (r1 + r2)) return false;
    } else {
      const double area = circle_overlap_area(r1, r2, d);
      const double smaller = kPi * std::min(r1, r2) * std::min(r1, r2);
      if (area / smaller > policy.max_overlap_fraction) return false;
    }
  }
  return true;
}

// Low-order Fourier contour noise; coefficients derive from the cell's own
// stream so a retained SceneSpec re-renders bit-identically.
struct ContourNoise {
  static constexpr int kFirst = 2, kLast = 5;
  double coef[kLast - kFirst + 1];
  double phase[kLast - kFirst + 1];

  ContourNoise(double amplitude, uint64_t seed) {
    Rng rng(seed);
    for (int h = kFirst; h <= kLast; ++h) {
      coef[h - kFirst] = amplitude * rng.normal() / h;
      phase[h - kFirst] = rng.uniform(0, 2 * kPi);
    }
  }

  double factor(double theta) const {
    double f = 1.0;
    for (int h = kFirst; h <= kLast; ++h)
      f += coef[h - kFirst] * std::cos(h * theta + phase[h - kFirst]);
    return std::clamp(f, 0.6, 1.4);
  }
};

struct Sprite {
  int x0 = 0, y0 = 0;            // canvas position of the patch origin
  Image color;                    // premultiplied by alpha
  Image alpha;
};

// Rasterizes one cell into a local sprite with 2x2 supersampling, then blurs
// color and alpha together (premultiplied) by the cell's blur sigma.
Sprite rasterize_cell(const CellSpec& c, uint64_t noise_seed) {
  const double ext = cell_extent(c);
  const int x0 = static_cast<int>(std::floor(c.center_x - ext));
  const int y0 = static_cast<int>(std::floor(c.center_y - ext));
  const int x1 = static_cast<int>(std::ceil(c.center_x + ext));
  const int y1 = static_cast<int>(std::ceil(c.center_y + ext));
  const int w = x1 - x0 + 1;
  const int h = y1 - y0 + 1;

  Sprite s;
  s.x0 = x0;
  s.y0 = y0;
  s.color = Image(w, h, 0.0f);
  s.alpha = Image(w, h, 0.0f);

  const ContourNoise noise(c.deformation_amplitude, noise_seed);
  const double cosr = std::cos(c.rotation);
  const double sinr = std::sin(c.rotation);
  const double wn = c.membrane_width / std::min(c.radius_a, c.radius_b);

  constexpr int kSS = 2;  // supersampling per axis
  constexpr double kSub[kSS] = {0.25, 0.75};

  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      double cov = 0.0, val = 0.0;
      for (int sy = 0; sy < kSS; ++sy)
        for (int sx = 0; sx < kSS; ++sx) {
          const double gx = x0 + px + kSub[sx] - c.center_x;
          const double gy = y0 + py + kSub[sy] - c.center_y;
          const double rx = (gx * cosr + gy * sinr) / c.radius_a;
          const double ry = (-gx * sinr + gy * cosr) / c.radius_b;
          const double rho = std::hypot(rx, ry);
          if (rho > 1.6) continue;
          const double theta = std::atan2(ry, rx);
          const double rho_n = rho / noise.factor(theta);
          if (rho_n > 1.0) continue;
          cov += 1.0;
          val += rho_n < 1.0 - wn ? c.interior_brightness : c.membrane_brightness;
        }
      if (cov > 0.0) {
        const double inv = 1.0 / (kSS * kSS);
        s.alpha.at(px, py) = static_cast<float>(cov * inv);
        s.color.at(px, py) = static_cast<float>(val * inv);  // premultiplied
      }
    }

  if (c.blur_sigma > 0.0) {
    gaussian_blur(s.color, c.blur_sigma);
    gaussian_blur(s.alpha, c.blur_sigma);
  }
  return s;
}

void composite(Image& canvas, const Sprite& s, double opacity) {
  for (int py = 0; py < s.alpha.height; ++py) {
    const int cy = s.y0 + py;
    if (cy < 0 || cy >= canvas.height) continue;
    for (int px = 0; px < s.alpha.width; ++px) {
      const int cx = s.x0 + px;
      if (cx < 0 || cx >= canvas.width) continue;
      const double a = s.alpha.at(px, py) * opacity;
      if (a <= 0.0) continue;
      canvas.at(cx, cy) = static_cast<float>(
          canvas.at(cx, cy) * (1.0 - a) + s.color.at(px, py) * opacity);
    }
  }
}

struct StyleLevels {
  double bg_interior, bg_border;
};

StyleLevels style_levels(Style s) {
  if (style_is_bright_field(s)) return {0.75, 0.45};
  return {0.30, 0.12};
}

}  // namespace

const char* to_string(Style s) {
  switch (s) {
    case Style::syn_pc: return "syn-pc";
    case Style::syn_bf: return "syn-bf";
    case Style::pseudo_nat_pc: return "pseudo-nat-pc";
    case Style::pseudo_nat_bf: return "pseudo-nat-bf";
  }
  return "syn-pc";
}

Style style_from_string(const std::string& s) {
  if (s == "syn-pc") return Style::syn_pc;
  if (s == "syn-bf") return Style::syn_bf;
  if (s == "pseudo-nat-pc") return Style::pseudo_nat_pc;
  if (s == "pseudo-nat-bf") return Style::pseudo_nat_bf;
  throw ValidationError("unknown style: " + s);
}

Domain style_domain(Style s) {
  return style_is_pseudo_nat(s) ? Domain::nat : Domain::syn;
}

bool style_is_pseudo_nat(Style s) {
  return s == Style::pseudo_nat_pc || s == Style::pseudo_nat_bf;
}

bool style_is_bright_field(Style s) {
  return s == Style::syn_bf || s == Style::pseudo_nat_bf;
}

GeneratorConfig GeneratorConfig::defaults(Style style) {
  GeneratorConfig cfg;
  cfg.style = style;
  // truncated geometric over 1..30, mode at 1
  double norm = 0.0;
  for (int k = 1; k <= 30; ++k) norm += std::pow(0.88, k - 1);
  for (int k = 1; k <= 30; ++k)
    cfg.count_distribution[k] = std::pow(0.88, k - 1) / norm;

  if (style_is_bright_field(style)) {
    // bright-field: dark cells with a darker membrane on a light chamber
    cfg.interior_brightness_min = 0.35;
    cfg.interior_brightness_max = 0.55;
    cfg.membrane_brightness_min = 0.10;
    cfg.membrane_brightness_max = 0.30;
  }
  if (style_is_pseudo_nat(style)) {
    cfg.deformation_min = 0.08;
    cfg.deformation_max = 0.25;
    cfg.noise_max = 0.06;
    cfg.background_brightness_scale_min = 0.70;
    cfg.background_brightness_scale_max = 1.30;
  }
  return cfg;
}

void GeneratorConfig::validate() const {
  if (count_distribution.empty())
    throw ValidationError("count_distribution is empty");
  double sum = 0.0;
  for (const auto& [k, p] : count_distribution) {
    if (k < 1 || k > 30)
      throw ValidationError("count_distribution keys must lie in [1,30]");
    if (p < 0) throw ValidationError("count_distribution has negative mass");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ValidationError("count_distribution must sum to 1");
  if (radius_min <= 0 || radius_max < radius_min)
    throw ValidationError("invalid radius range");
  if (aspect_min <= 0 || aspect_min > 1)
    throw ValidationError("aspect_min must lie in (0,1]");
  auto check01 = [](double lo, double hi, const char* what) {
    if (lo < 0 || hi > 1 || hi < lo)
      throw ValidationError(std::string("invalid range for ") + what);
  };
  check01(interior_brightness_min, interior_brightness_max, "interior brightness");
  check01(membrane_brightness_min, membrane_brightness_max, "membrane brightness");
  check01(noise_min, noise_max, "noise amplitude");
  if (membrane_width_min < 0 || membrane_width_max < membrane_width_min)
    throw ValidationError("invalid membrane width range");
  if (background_brightness_scale_min < 0.5 || background_brightness_scale_max > 1.5 ||
      background_brightness_scale_max < background_brightness_scale_min)
    throw ValidationError("background brightness scale must lie in [0.5,1.5]");
  if (background_bank_size < 1) throw ValidationError("background bank is empty");
  if (smudges_min < 0 || smudges_max < smudges_min)
    throw ValidationError("invalid smudge count range");
}

Image build_background_procedural(Style style, int id) {
  const auto lv = style_levels(style);
  Image img(kImageSize, kImageSize);
  const int inset = 7;
  const double ramp = 2.5;  // soft border transition, pixels
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x) {
      const int d = std::min(std::min(x, kImageSize - 1 - x),
                             std::min(y, kImageSize - 1 - y));
      double t = (d - inset) / ramp + 0.5;
      t = std::clamp(t, 0.0, 1.0);
      img.at(x, y) = static_cast<float>(lv.bg_border + t * (lv.bg_interior - lv.bg_border));
    }
  // deterministic per-id gradient, plus mild mottling for pseudo-nat looks
  Rng rng(derive_seed(0xBAC6, static_cast<uint64_t>(id)));
  const double gx = rng.uniform(-0.05, 0.05);
  const double gy = rng.uniform(-0.05, 0.05);
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x) {
      const double fx = x / static_cast<double>(kImageSize) - 0.5;
      const double fy = y / static_cast<double>(kImageSize) - 0.5;
      img.at(x, y) = static_cast<float>(img.at(x, y) * (1.0 + gx * fx + gy * fy));
    }
  if (style_is_pseudo_nat(style)) {
    Image mottle(kImageSize, kImageSize, 0.0f);
    const int blobs = rng.uniform_int(3, 6);
    for (int b = 0; b < blobs; ++b) {
      const double bx = rng.uniform(10, kImageSize - 10);
      const double by = rng.uniform(10, kImageSize - 10);
      const double br = rng.uniform(8, 24);
      const double amp = rng.uniform(-0.03, 0.03);
      for (int y = 0; y < kImageSize; ++y)
        for (int x = 0; x < kImageSize; ++x) {
          const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
          mottle.at(x, y) += static_cast<float>(amp * std::exp(-d2 / (2 * br * br)));
        }
    }
    for (size_t i = 0; i < img.size(); ++i) img.pixels[i] += mottle.pixels[i];
  }
  clamp01(img);
  return img;
}

Image build_background_mean(const std::vector<Image>& images) {
  if (images.empty())
    throw ValidationError("build_background_mean: empty image list");
  for (const auto& img : images)
    if (!img.is_working_resolution())
      throw ValidationError("build_background_mean: images must be 128x128");
  return mean_image(images);
}

SceneSpec sample_scene(const GeneratorConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  SceneSpec scene;
  scene.seed = seed;

  // inverse-CDF draw from the count histogram
  const double u = rng.uniform();
  int count = config.count_distribution.rbegin()->first;
  double acc = 0.0;
  for (const auto& [k, p] : config.count_distribution) {
    acc += p;
    if (u < acc) {
      count = k;
      break;
    }
  }

  constexpr int kMaxTries = 1000;
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
      CellSpec c;
      c.radius_a = rng.uniform(config.radius_min, config.radius_max);
      c.radius_b = c.radius_a * rng.uniform(config.aspect_min, 1.0);
      c.rotation = rng.uniform(0, kPi);
      c.interior_brightness =
          rng.uniform(config.interior_brightness_min, config.interior_brightness_max);
      c.membrane_brightness =
          rng.uniform(config.membrane_brightness_min, config.membrane_brightness_max);
      c.membrane_width =
          rng.uniform(config.membrane_width_min, config.membrane_width_max);
      c.blur_sigma = rng.uniform(config.cell_blur_min, config.cell_blur_max);
      c.deformation_amplitude =
          rng.uniform(config.deformation_min, config.deformation_max);
      const double margin = max_radius(c) * (1.0 + c.deformation_amplitude) +
                            c.membrane_width + 1.0;
      if (2 * margin >= kImageSize) continue;
      c.center_x = rng.uniform(margin, kImageSize - margin);
      c.center_y = rng.uniform(margin, kImageSize - margin);
      if (!placement_ok(c, scene.cells, config.overlap)) continue;
      scene.cells.push_back(c);
      placed = true;
      break;
    }
    if (!placed)
      throw PlacementError("could not place cell " + std::to_string(i + 1) +
                           " of " + std::to_string(count) +
                           " under the overlap policy");
  }

  if (style_is_pseudo_nat(config.style)) {
    const int n_smudges = rng.uniform_int(config.smudges_min, config.smudges_max);
    const auto lv = style_levels(config.style);
    for (int i = 0; i < n_smudges; ++i) {
      CellSpec s;
      s.radius_a = rng.uniform(1.0, 3.5);
      s.radius_b = s.radius_a * rng.uniform(0.6, 1.0);
      s.rotation = rng.uniform(0, kPi);
      // faint: close to the chamber level
      const double off = rng.uniform(-0.12, 0.12);
      s.interior_brightness = std::clamp(lv.bg_interior + off, 0.0, 1.0);
      s.membrane_brightness = std::clamp(lv.bg_interior + 1.5 * off, 0.0, 1.0);
      s.membrane_width = rng.uniform(0.5, 1.0);
      s.blur_sigma = rng.uniform(0.3, 1.0);
      s.deformation_amplitude = rng.uniform(0.05, 0.3);
      const double margin = max_radius(s) + 3.0;
      s.center_x = rng.uniform(margin, kImageSize - margin);
      s.center_y = rng.uniform(margin, kImageSize - margin);
      scene.smudges.push_back(s);
    }
  }

  scene.background_id = rng.uniform_int(0, config.background_bank_size - 1);
  scene.background_brightness_scale =
      rng.uniform(config.background_brightness_scale_min,
                  config.background_brightness_scale_max);
  scene.noise_amplitude = rng.uniform(config.noise_min, config.noise_max);
  scene.global_blur_sigma = rng.uniform(config.global_blur_min, config.global_blur_max);
  return scene;
}

Image render(const SceneSpec& scene, const GeneratorConfig& config) {
  if (static_cast<int>(scene.cells.size()) > 30)
    throw ValidationError("scene has more than 30 cells");
  Image canvas = build_background_procedural(config.style, scene.background_id);
  for (auto& p : canvas.pixels)
    p = static_cast<float>(p * scene.background_brightness_scale);

  // smudges sit under the cells
  for (size_t i = 0; i < scene.smudges.size(); ++i) {
    const Sprite s = rasterize_cell(scene.smudges[i],
                                    derive_seed(scene.seed, 0x53D6E, i));
    composite(canvas, s, 0.45);
  }
  for (size_t i = 0; i < scene.cells.size(); ++i) {
    const Sprite s = rasterize_cell(scene.cells[i],
                                    derive_seed(scene.seed, 0xCE11, i));
    composite(canvas, s, 1.0);
  }

  gaussian_blur(canvas, scene.global_blur_sigma);

  if (scene.noise_amplitude > 0.0) {
    Rng rng(derive_seed(scene.seed, 0x7015E));
    for (auto& p : canvas.pixels)
      p = static_cast<float>(p + rng.uniform(-scene.noise_amplitude,
                                             scene.noise_amplitude));
  }
  clamp01(canvas);
  return canvas;
}

DatasetManifest generate_dataset(const GeneratorConfig& config, int n,
                                 uint64_t seed, const std::string& out_dir) {
  if (n <= 0) throw ValidationError("generate_dataset: n must be positive");
  config.validate();
  std::filesystem::create_directories(out_dir);

  const Domain domain = style_domain(config.style);
  std::vector<SceneSpec> scenes(n);
  std::vector<Image> images(n);
  std::vector<std::string> names(n);

  // each sample derives its own stream; generation order is irrelevant
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const uint64_t sample_seed = derive_seed(seed, 0x5CEE, static_cast<uint64_t>(i));
    scenes[i] = sample_scene(config, sample_seed);
    images[i] = render(scenes[i], config);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%05d.png", i);
    names[i] = buf;
    write_png(images[i], out_dir + "/" + names[i]);
  }

  std::ofstream manifest(out_dir + "/manifest.csv", std::ios::binary | std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest.csv in " + out_dir);
  manifest << "filename,count,domain,seed\n";
  for (int i = 0; i < n; ++i)
    manifest << names[i] << ',' << scenes[i].label() << ',' << to_string(domain)
             << ',' << derive_seed(seed, 0x5CEE, static_cast<uint64_t>(i)) << "\n";
  manifest.close();

  nlohmann::json scene_doc = nlohmann::json::object();
  for (int i = 0; i < n; ++i) scene_doc[names[i]] = scenes[i];
  std::ofstream sf(out_dir + "/scenes.json", std::ios::binary | std::ios::trunc);
  if (!sf) throw IoError("cannot write scenes.json in " + out_dir);
  sf << scene_doc.dump(1) << "\n";
  sf.close();

  DatasetManifest out;
  out.dir = out_dir;
  out.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    out.samples[i].image = std::move(images[i]);
    out.samples[i].label = scenes[i].label();
    out.samples[i].domain = domain;
    out.samples[i].id = names[i];
    out.samples[i].seed = derive_seed(seed, 0x5CEE, static_cast<uint64_t>(i));
  }
  return out;
}

}  // namespace twincount
