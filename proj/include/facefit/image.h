#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facefit/vec.h"

namespace facefit {

// Linear-light raster, row 0 at the top, `channels` interleaved floats.
struct Image {
  int width = 0, height = 0, channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c = 3) : width(w), height(h), channels(c), data(std::size_t(w) * h * c, 0.0f) {}

  float& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

// Continuous pixel coordinates; texel (i,j) has its center at (i+0.5, j+0.5).
// Clamp-to-edge.  Out-of-range channel access is the caller's bug.
double sample_bilinear(const Image& img, double px, double py, int c);
Vec3 sample_bilinear3(const Image& img, double px, double py);

// PFM: 'PF' (3ch) / 'Pf' (1ch), negative scale = little endian, rows
// bottom-to-top.  Round-trips bit-exactly.
Image read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Image& img);

// 8-bit PNG; values decode to linear via gamma 2.2 and encode back with the
// inverse after clamping to [0,1].
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);
// Mask/gray helpers (no gamma).
Image read_png_raw(const std::string& path);
void write_png_gray(const std::string& path, const Image& img);

Image read_image(const std::string& path);  // dispatch on extension

double luminance(double r, double g, double b);
Image tonemap(const Image& linear);  // clamp01 + gamma 1/2.2

}  // namespace facefit
