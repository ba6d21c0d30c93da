#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace twincount {

inline constexpr int kImageSize = 128;  // fixed working resolution

// Grayscale image, intensities in [0, 1], row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

  float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

  size_t size() const { return pixels.size(); }
  bool is_working_resolution() const {
    return width == kImageSize && height == kImageSize;
  }
};

// 8-bit grayscale PNG; quantization round(pixel * 255) on write, /255 on read.
void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

void clamp01(Image& img);

// Separable Gaussian blur, radius ceil(3*sigma), reflected borders. sigma <= 0
// is the identity.
void gaussian_blur(Image& img, double sigma);

// Mean filter with an odd square kernel, reflected borders.
Image box_blur(const Image& img, int kernel);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
// k quarter turns counter-clockwise
Image rotate90(const Image& img, int k);

// Bilinear resample to (out_w, out_h).
Image resize_bilinear(const Image& img, int out_w, int out_h);

Image crop(const Image& img, int x0, int y0, int w, int h);

// Per-pixel arithmetic mean; all images must share dimensions.
Image mean_image(const std::vector<Image>& images);

}  // namespace twincount
