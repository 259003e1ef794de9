#include "facefit/bundle.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little, "bundle: little-endian host required");

namespace facefit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> read_f32(const fs::path& path, std::size_t expected, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(std::string("bundle: missing array file for ") + what + ": " + path.string());
  std::vector<float> raw(expected);
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(expected * sizeof(float)));
  if (std::size_t(in.gcount()) != expected * sizeof(float) || in.peek() != EOF)
    throw std::runtime_error(std::string("bundle: dimension mismatch in ") + what + " (" + path.string() +
                             "), expected " + std::to_string(expected) + " float32 values");
  return {raw.begin(), raw.end()};
}

std::vector<int> read_i32(const fs::path& path, std::size_t expected, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(std::string("bundle: missing array file for ") + what + ": " + path.string());
  std::vector<std::int32_t> raw(expected);
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(expected * sizeof(std::int32_t)));
  if (std::size_t(in.gcount()) != expected * sizeof(std::int32_t) || in.peek() != EOF)
    throw std::runtime_error(std::string("bundle: dimension mismatch in ") + what + " (" + path.string() +
                             "), expected " + std::to_string(expected) + " int32 values");
  return {raw.begin(), raw.end()};
}

void write_f32(const fs::path& path, const std::vector<double>& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("bundle: cannot write " + path.string());
  std::vector<float> raw(v.begin(), v.end());
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size() * sizeof(float)));
}

void write_i32(const fs::path& path, const std::vector<int>& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("bundle: cannot write " + path.string());
  std::vector<std::int32_t> raw(v.begin(), v.end());
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size() * sizeof(std::int32_t)));
}

}  // namespace

void validate_bundle(const ModelBundle& b) {
  const int n = b.num_vertices;
  if (n <= 0 || b.num_triangles <= 0) throw std::runtime_error("bundle: empty geometry");
  if (b.texture_resolution <= 0) throw std::runtime_error("bundle: texture_resolution must be positive");
  if (b.K_s <= 0 || b.K_e <= 0 || b.K_r <= 0) throw std::runtime_error("bundle: basis counts must be positive");
  auto need = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want)
      throw std::runtime_error("bundle: " + std::string(what) + " has " + std::to_string(got) +
                               " entries, expected " + std::to_string(want));
  };
  const std::size_t n3 = std::size_t(3) * n;
  need(b.mean_shape.size(), n3, "mean_shape");
  need(b.shape_basis.size(), n3 * b.K_s, "shape_basis");
  need(b.expr_basis.size(), n3 * b.K_e, "expr_basis");
  need(b.mean_diffuse.size(), n3, "mean_diffuse");
  need(b.diffuse_basis.size(), n3 * b.K_r, "diffuse_basis");
  need(b.mean_specular.size(), n3, "mean_specular");
  need(b.specular_basis.size(), n3 * b.K_r, "specular_basis");
  need(b.prior_var_shape.size(), std::size_t(b.K_s), "prior_var_shape");
  need(b.prior_var_refl.size(), std::size_t(b.K_r), "prior_var_refl");
  need(b.triangles.size(), std::size_t(3) * b.num_triangles, "triangles");
  need(b.uv.size(), std::size_t(2) * n, "uv");
  need(b.mirror.size(), std::size_t(n), "mirror");
  for (std::size_t i = 0; i < b.triangles.size(); ++i)
    if (b.triangles[i] < 0 || b.triangles[i] >= n)
      throw std::runtime_error("bundle: triangle index out of range at slot " + std::to_string(i));
  for (int i = 0; i < n; ++i) {
    if (b.uv[2 * i] < 0.0 || b.uv[2 * i] > 1.0 || b.uv[2 * i + 1] < 0.0 || b.uv[2 * i + 1] > 1.0)
      throw std::runtime_error("bundle: uv outside [0,1]^2 at vertex " + std::to_string(i));
    if (b.mirror[i] < 0 || b.mirror[i] >= n || b.mirror[b.mirror[i]] != i)
      throw std::runtime_error("bundle: mirror map not involutive at vertex " + std::to_string(i));
  }
  if (int(b.landmark_ids.size()) != kNumLandmarks)
    throw std::runtime_error("bundle: expected " + std::to_string(kNumLandmarks) + " landmark ids");
  for (int id : b.landmark_ids)
    if (id < 0 || id >= n) throw std::runtime_error("bundle: landmark vertex id out of range");
  for (double v : b.prior_var_shape)
    if (!(v > 0.0)) throw std::runtime_error("bundle: non-positive shape prior variance");
  for (double v : b.prior_var_refl)
    if (!(v > 0.0)) throw std::runtime_error("bundle: non-positive reflectance prior variance");
}

ModelBundle load_bundle(const std::string& dir) {
  fs::path root(dir);
  std::ifstream mf(root / "manifest.json");
  if (!mf) throw std::runtime_error("bundle: missing manifest.json in " + dir);
  json m;
  try {
    mf >> m;
  } catch (const json::exception& e) {
    throw std::runtime_error("bundle: malformed manifest.json in " + dir + ": " + e.what());
  }

  ModelBundle b;
  try {
    b.num_vertices = m.at("num_vertices").get<int>();
    b.num_triangles = m.at("num_triangles").get<int>();
    b.K_s = m.at("K_s").get<int>();
    b.K_e = m.at("K_e").get<int>();
    b.K_r = m.at("K_r").get<int>();
    b.texture_resolution = m.at("texture_resolution").get<int>();
  } catch (const json::exception& e) {
    throw std::runtime_error("bundle: manifest missing required field: " + std::string(e.what()));
  }

  const std::size_t n3 = std::size_t(b.num_vertices) * 3;
  b.mean_shape = read_f32(root / "mean_shape.f32", n3, "mean_shape");
  b.shape_basis = read_f32(root / "shape_basis.f32", n3 * b.K_s, "shape_basis");
  b.expr_basis = read_f32(root / "expr_basis.f32", n3 * b.K_e, "expr_basis");
  b.mean_diffuse = read_f32(root / "mean_diffuse.f32", n3, "mean_diffuse");
  b.diffuse_basis = read_f32(root / "diffuse_basis.f32", n3 * b.K_r, "diffuse_basis");
  b.mean_specular = read_f32(root / "mean_specular.f32", n3, "mean_specular");
  b.specular_basis = read_f32(root / "specular_basis.f32", n3 * b.K_r, "specular_basis");
  b.prior_var_shape = read_f32(root / "prior_var_shape.f32", b.K_s, "prior_var_shape");
  b.prior_var_refl = read_f32(root / "prior_var_refl.f32", b.K_r, "prior_var_refl");
  b.uv = read_f32(root / "uv.f32", std::size_t(b.num_vertices) * 2, "uv");
  b.triangles = read_i32(root / "triangles.i32", std::size_t(b.num_triangles) * 3, "triangles");
  b.landmark_ids = read_i32(root / "landmark_ids.i32", kNumLandmarks, "landmark_ids");
  b.mirror = read_i32(root / "mirror.i32", b.num_vertices, "mirror");

  validate_bundle(b);
  b.atlas = build_uv_atlas(b, b.texture_resolution);
  return b;
}

void save_bundle(const std::string& dir, const ModelBundle& b) {
  fs::path root(dir);
  fs::create_directories(root);
  json m = {{"num_vertices", b.num_vertices}, {"num_triangles", b.num_triangles},
            {"K_s", b.K_s},                   {"K_e", b.K_e},
            {"K_r", b.K_r},                   {"texture_resolution", b.texture_resolution}};
  std::ofstream mf(root / "manifest.json");
  if (!mf) throw std::runtime_error("bundle: cannot write manifest in " + dir);
  mf << m.dump(2) << "\n";

  write_f32(root / "mean_shape.f32", b.mean_shape);
  write_f32(root / "shape_basis.f32", b.shape_basis);
  write_f32(root / "expr_basis.f32", b.expr_basis);
  write_f32(root / "mean_diffuse.f32", b.mean_diffuse);
  write_f32(root / "diffuse_basis.f32", b.diffuse_basis);
  write_f32(root / "mean_specular.f32", b.mean_specular);
  write_f32(root / "specular_basis.f32", b.specular_basis);
  write_f32(root / "prior_var_shape.f32", b.prior_var_shape);
  write_f32(root / "prior_var_refl.f32", b.prior_var_refl);
  write_f32(root / "uv.f32", b.uv);
  write_i32(root / "triangles.i32", b.triangles);
  write_i32(root / "landmark_ids.i32", b.landmark_ids);
  write_i32(root / "mirror.i32", b.mirror);
}

UvAtlas build_uv_atlas(const ModelBundle& b, int res) {
  UvAtlas atlas;
  atlas.res = res;
  atlas.tri.assign(std::size_t(res) * res, -1);
  atlas.bary.assign(std::size_t(res) * res * 3, 0.0);

  for (int t = 0; t < b.num_triangles; ++t) {
    const int* idx = &b.triangles[3 * t];
    Vec2 a = b.vertex_uv(idx[0]), bb = b.vertex_uv(idx[1]), c = b.vertex_uv(idx[2]);
    double det = (bb.x - a.x) * (c.y - a.y) - (c.x - a.x) * (bb.y - a.y);
    if (std::fabs(det) < 1e-14) continue;  // degenerate uv triangle
    double lo_x = std::min({a.x, bb.x, c.x}), hi_x = std::max({a.x, bb.x, c.x});
    double lo_y = std::min({a.y, bb.y, c.y}), hi_y = std::max({a.y, bb.y, c.y});
    int x0 = std::max(0, int(std::floor(lo_x * res - 0.5)));
    int x1 = std::min(res - 1, int(std::ceil(hi_x * res - 0.5)));
    int y0 = std::max(0, int(std::floor(lo_y * res - 0.5)));
    int y1 = std::min(res - 1, int(std::ceil(hi_y * res - 0.5)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        std::size_t slot = std::size_t(y) * res + x;
        if (atlas.tri[slot] >= 0) continue;  // first triangle wins (deterministic)
        double u = (x + 0.5) / res, v = (y + 0.5) / res;
        double w1 = ((u - a.x) * (c.y - a.y) - (c.x - a.x) * (v - a.y)) / det;
        double w2 = ((bb.x - a.x) * (v - a.y) - (u - a.x) * (bb.y - a.y)) / det;
        double w0 = 1.0 - w1 - w2;
        const double eps = -1e-9;
        if (w0 < eps || w1 < eps || w2 < eps) continue;
        w0 = std::max(0.0, w0);
        w1 = std::max(0.0, w1);
        w2 = std::max(0.0, w2);
        double s = w0 + w1 + w2;
        atlas.tri[slot] = t;
        atlas.bary[slot * 3 + 0] = w0 / s;
        atlas.bary[slot * 3 + 1] = w1 / s;
        atlas.bary[slot * 3 + 2] = w2 / s;
      }
  }
  return atlas;
}

}  // namespace facefit
