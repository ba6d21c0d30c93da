#include "twincount/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "twincount/errors.hpp"

namespace twincount {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace

void write_png(const Image& img, const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng error while writing: " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> row(img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = std::clamp(img.at(x, y), 0.0f, 1.0f);
      row[x] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open for reading: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng error while reading: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const int width = png_get_image_width(png, info);
  const int height = png_get_image_height(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  // normalize anything to 8-bit gray
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_PALETTE ||
      color_type == PNG_COLOR_TYPE_RGB_ALPHA)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  Image img(width, height);
  std::vector<uint8_t> row(png_get_rowbytes(png, info));
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x)
      img.at(x, y) = static_cast<float>(row[x]) / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void clamp01(Image& img) {
  for (auto& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
}

void gaussian_blur(Image& img, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& k : kernel) k = static_cast<float>(k / sum);

  Image tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i)
        acc += img.at(reflect(x + i, img.width), y) * kernel[i + radius];
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i)
        acc += tmp.at(x, reflect(y + i, img.height)) * kernel[i + radius];
      img.at(x, y) = acc;
    }
}

Image box_blur(const Image& img, int kernel) {
  if (kernel < 1 || kernel % 2 == 0)
    throw ValidationError("box_blur kernel must be odd and >= 1");
  if (kernel == 1) return img;
  const int radius = kernel / 2;
  const float inv = 1.0f / kernel;

  Image tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i)
        acc += img.at(reflect(x + i, img.width), y);
      tmp.at(x, y) = acc * inv;
    }
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i)
        acc += tmp.at(x, reflect(y + i, img.height));
      out.at(x, y) = acc * inv;
    }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y) = img.at(img.width - 1 - x, y);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y) = img.at(x, img.height - 1 - y);
  return out;
}

Image rotate90(const Image& img, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return img;
  Image out;
  if (k == 2) {
    out = Image(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(x, y) = img.at(img.width - 1 - x, img.height - 1 - y);
    return out;
  }
  out = Image(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (k == 1)
        out.at(y, img.width - 1 - x) = img.at(x, y);
      else  // k == 3
        out.at(img.height - 1 - y, x) = img.at(x, y);
    }
  return out;
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w == img.width && out_h == img.height) return img;
  Image out(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = std::clamp(fx - x0, 0.0, 1.0);
      const double top = img.at(x0, y0) * (1 - wx) + img.at(x1, y0) * wx;
      const double bot = img.at(x0, y1) * (1 - wx) + img.at(x1, y1) * wx;
      out.at(x, y) = static_cast<float>(top * (1 - wy) + bot * wy);
    }
  }
  return out;
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height)
    throw ValidationError("crop rectangle out of bounds");
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = img.at(x0 + x, y0 + y);
  return out;
}

Image mean_image(const std::vector<Image>& images) {
  if (images.empty()) throw ValidationError("mean_image: empty image list");
  const int w = images.front().width;
  const int h = images.front().height;
  std::vector<double> acc(static_cast<size_t>(w) * h, 0.0);
  for (const auto& img : images) {
    if (img.width != w || img.height != h)
      throw ValidationError("mean_image: mismatched dimensions");
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += img.pixels[i];
  }
  Image out(w, h);
  const double inv = 1.0 / static_cast<double>(images.size());
  for (size_t i = 0; i < acc.size(); ++i)
    out.pixels[i] = static_cast<float>(acc[i] * inv);
  return out;
}

}  // namespace twincount
