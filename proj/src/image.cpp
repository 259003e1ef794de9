#include "facefit/image.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "image: little-endian host required");

namespace facefit {

double sample_bilinear(const Image& img, double px, double py, int c) {
  double tx = px - 0.5, ty = py - 0.5;
  double fx = std::floor(tx), fy = std::floor(ty);
  double ax = tx - fx, ay = ty - fy;
  int x0 = std::clamp(int(fx), 0, img.width - 1);
  int x1 = std::clamp(int(fx) + 1, 0, img.width - 1);
  int y0 = std::clamp(int(fy), 0, img.height - 1);
  int y1 = std::clamp(int(fy) + 1, 0, img.height - 1);
  double top = img.at(x0, y0, c) * (1.0 - ax) + img.at(x1, y0, c) * ax;
  double bot = img.at(x0, y1, c) * (1.0 - ax) + img.at(x1, y1, c) * ax;
  return top * (1.0 - ay) + bot * ay;
}

Vec3 sample_bilinear3(const Image& img, double px, double py) {
  return {sample_bilinear(img, px, py, 0), sample_bilinear(img, px, py, 1), sample_bilinear(img, px, py, 2)};
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("image: cannot open '" + path + "'");
  return f;
}

}  // namespace

Image read_pfm(const std::string& path) {
  FilePtr f = open_or_throw(path, "rb");
  char tag[3] = {};
  if (std::fscanf(f.get(), "%2s", tag) != 1) throw std::runtime_error("image: bad PFM header in '" + path + "'");
  int channels;
  if (std::strcmp(tag, "PF") == 0) channels = 3;
  else if (std::strcmp(tag, "Pf") == 0) channels = 1;
  else throw std::runtime_error("image: '" + path + "' is not a PFM file");
  int w = 0, h = 0;
  double scale = 0.0;
  if (std::fscanf(f.get(), "%d %d %lf", &w, &h, &scale) != 3 || w <= 0 || h <= 0)
    throw std::runtime_error("image: bad PFM dimensions in '" + path + "'");
  if (scale >= 0.0) throw std::runtime_error("image: big-endian PFM not supported ('" + path + "')");
  std::fgetc(f.get());  // single whitespace byte after the scale
  Image img(w, h, channels);
  std::vector<float> row(std::size_t(w) * channels);
  for (int y = h - 1; y >= 0; --y) {  // PFM stores rows bottom-to-top
    if (std::fread(row.data(), sizeof(float), row.size(), f.get()) != row.size())
      throw std::runtime_error("image: truncated PFM '" + path + "'");
    std::memcpy(&img.data[std::size_t(y) * w * channels], row.data(), row.size() * sizeof(float));
  }
  return img;
}

void write_pfm(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::runtime_error("image: PFM supports 1 or 3 channels");
  FilePtr f = open_or_throw(path, "wb");
  std::fprintf(f.get(), "%s\n%d %d\n-1.0\n", img.channels == 3 ? "PF" : "Pf", img.width, img.height);
  for (int y = img.height - 1; y >= 0; --y)
    std::fwrite(&img.data[std::size_t(y) * img.width * img.channels], sizeof(float),
                std::size_t(img.width) * img.channels, f.get());
}

namespace {

Image read_png_impl(const std::string& path, bool linearize) {
  FilePtr f = open_or_throw(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("image: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("image: failed to decode '" + path + "'");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  std::vector<png_byte> raster(std::size_t(w) * h * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = &raster[std::size_t(y) * w * 3];
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(int(w), int(h), 3);
  for (std::size_t i = 0; i < raster.size(); ++i) {
    double v = raster[i] / 255.0;
    img.data[i] = float(linearize ? std::pow(v, 2.2) : v);
  }
  return img;
}

void write_png_impl(const std::string& path, const Image& img, bool gamma_encode) {
  FilePtr f = open_or_throw(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("image: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("image: failed to encode '" + path + "'");
  }
  png_init_io(png, f.get());
  int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(std::size_t(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = std::clamp(double(img.at(x, y, c)), 0.0, 1.0);
        if (gamma_encode) v = std::pow(v, 1.0 / 2.2);
        row[std::size_t(x) * img.channels + c] = png_byte(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_png(const std::string& path) { return read_png_impl(path, true); }
void write_png(const std::string& path, const Image& img) { write_png_impl(path, img, true); }
Image read_png_raw(const std::string& path) { return read_png_impl(path, false); }
void write_png_gray(const std::string& path, const Image& img) { write_png_impl(path, img, false); }

Image read_image(const std::string& path) {
  auto ends_with = [&](const char* s) {
    std::size_t n = std::strlen(s);
    return path.size() >= n && path.compare(path.size() - n, n, s) == 0;
  };
  if (ends_with(".pfm")) return read_pfm(path);
  if (ends_with(".png")) return read_png(path);
  throw std::runtime_error("image: unsupported extension on '" + path + "' (want .pfm or .png)");
}

double luminance(double r, double g, double b) { return 0.2126 * r + 0.7152 * g + 0.0722 * b; }

Image tonemap(const Image& linear) {
  Image out = linear;
  for (float& v : out.data) v = float(std::pow(std::clamp(double(v), 0.0, 1.0), 1.0 / 2.2));
  return out;
}

}  // namespace facefit
