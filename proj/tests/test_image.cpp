#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "facefit/image.h"
#include "facefit/rng.h"

using namespace facefit;

namespace {

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Image random_image(int w, int h, int ch, std::uint64_t seed, float lo, float hi) {
  Image img(w, h, ch);
  Rng rng(seed);
  for (float& v : img.data) v = lo + float(rng.next_double()) * (hi - lo);
  return img;
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("pfm round-trip is bit-exact for color and gray") {
  for (int ch : {1, 3}) {
    Image img = random_image(13, 7, ch, 99 + ch, -2.0f, 5.0f);
    std::string path = tmp_path("rt.pfm");
    write_pfm(path, img);
    Image back = read_pfm(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    REQUIRE(back.channels == img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);
    std::remove(path.c_str());
  }
}

TEST_CASE("png round-trip stays within 8-bit quantization") {
  Image img = random_image(16, 9, 3, 4, 0.0f, 1.0f);
  img.at(0, 0, 0) = 0.0f;
  img.at(1, 0, 0) = 1.0f;
  std::string path = tmp_path("rt.png");
  write_png(path, img);
  Image back = read_png(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  float worst = 0.0f;
  for (std::size_t i = 0; i < img.data.size(); ++i)
    worst = std::max(worst, std::fabs(back.data[i] - img.data[i]));
  // Half a code in gamma space maps to < 0.01 in linear light.
  CHECK(worst < 0.01f);
  CHECK(back.at(0, 0, 0) == 0.0f);  // endpoints are exact
  CHECK(back.at(1, 0, 0) == 1.0f);
  std::remove(path.c_str());
}

TEST_CASE("png encode clamps values outside the unit range") {
  Image img(2, 1, 3);
  img.at(0, 0, 0) = -0.5f;
  img.at(1, 0, 0) = 2.5f;
  std::string path = tmp_path("clamp.png");
  write_png(path, img);
  Image back = read_png(path);
  CHECK(back.at(0, 0, 0) == 0.0f);
  CHECK(back.at(1, 0, 0) == 1.0f);
  std::remove(path.c_str());
}

TEST_CASE("gray png round-trip without gamma") {
  Image img = random_image(8, 8, 1, 12, 0.0f, 1.0f);
  std::string path = tmp_path("gray.png");
  write_png_gray(path, img);
  Image back = read_png_raw(path);  // gray decodes expanded to identical rgb
  REQUIRE(back.channels == 3);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      CHECK(std::fabs(back.at(x, y, 0) - img.at(x, y, 0)) <= 0.5f / 255.0f + 1e-6f);
      CHECK(back.at(x, y, 0) == back.at(x, y, 1));
      CHECK(back.at(x, y, 0) == back.at(x, y, 2));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("read_image dispatches on extension") {
  Image img = random_image(5, 5, 3, 8, 0.0f, 1.0f);
  std::string pfm = tmp_path("d.pfm"), png = tmp_path("d.png");
  write_pfm(pfm, img);
  write_png(png, img);
  CHECK(read_image(pfm).data == read_pfm(pfm).data);
  CHECK(read_image(png).data == read_png(png).data);
  CHECK_THROWS((void)read_image(tmp_path("d.bmp")));
  std::remove(pfm.c_str());
  std::remove(png.c_str());
}

TEST_CASE("missing files raise errors") {
  CHECK_THROWS((void)read_pfm(tmp_path("does-not-exist.pfm")));
  CHECK_THROWS((void)read_png(tmp_path("does-not-exist.png")));
}

TEST_CASE("bilinear sampling") {
  Image img(4, 3, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = float(x + 10 * y + 100 * c);

  // Texel centers return the texel exactly.
  CHECK(sample_bilinear(img, 2.5, 1.5, 0) == doctest::Approx(2 + 10).epsilon(1e-12));
  // Halfway between two texels averages them.
  CHECK(sample_bilinear(img, 2.0, 0.5, 0) == doctest::Approx(1.5).epsilon(1e-12));
  // A linear ramp is reproduced exactly inside the interior:
  // f(px, py) = (px - 0.5) + 10 * (py - 0.5) between texel centers.
  CHECK(sample_bilinear(img, 1.75, 1.25, 0) == doctest::Approx(1.25 + 10 * 0.75).epsilon(1e-12));
  // Clamp-to-edge beyond the border.
  CHECK(sample_bilinear(img, -3.0, 0.5, 1) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(sample_bilinear(img, 3.9, 2.9, 0) == doctest::Approx(3 + 20).epsilon(1e-12));
  Vec3 v = sample_bilinear3(img, 0.5, 0.5);
  CHECK(v.y == 100.0);
  CHECK(v.z == 200.0);
}

TEST_CASE("luminance uses the standard weights") {
  CHECK(luminance(1, 1, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(luminance(1, 0, 0) + luminance(0, 1, 0) + luminance(0, 0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(luminance(0, 1, 0) > luminance(1, 0, 0));  // green dominates
  CHECK(luminance(1, 0, 0) > luminance(0, 0, 1));
}

TEST_CASE("tonemap clamps and applies the display gamma") {
  Image img(3, 1, 3);
  img.at(0, 0, 0) = -1.0f;
  img.at(1, 0, 0) = 0.25f;
  img.at(2, 0, 0) = 9.0f;
  Image tm = tonemap(img);
  CHECK(tm.at(0, 0, 0) == 0.0f);
  CHECK(tm.at(1, 0, 0) == doctest::Approx(std::pow(0.25, 1.0 / 2.2)).epsilon(1e-6));
  CHECK(tm.at(2, 0, 0) == 1.0f);
}

}  // TEST_SUITE
