#pragma once

#include <string>
#include <vector>

#include "facefit/vec.h"

namespace facefit {

inline constexpr int kNumLandmarks = 68;

// Texel -> (triangle, barycentrics) table from rasterizing the mesh's uv
// triangles at texel centers.  tri == -1 marks texels no triangle covers.
struct UvAtlas {
  int res = 0;
  std::vector<int> tri;
  std::vector<double> bary;  // res*res*3

  bool valid(int x, int y) const { return tri[std::size_t(y) * res + x] >= 0; }
};

// Morphable model: linear shape/expression bases over vertices plus linear
// diffuse/specular albedo bases, a shared uv chart, landmark vertex ids and a
// left/right mirror map.  Vertex arrays are xyz-interleaved (3N), albedo
// arrays rgb-interleaved (3N); bases are row-major (3N x K).
struct ModelBundle {
  int num_vertices = 0;
  int num_triangles = 0;
  int K_s = 0, K_e = 0, K_r = 0;
  int texture_resolution = 0;

  std::vector<double> mean_shape, shape_basis, expr_basis;
  std::vector<double> mean_diffuse, diffuse_basis;
  std::vector<double> mean_specular, specular_basis;
  std::vector<double> prior_var_shape, prior_var_refl;
  std::vector<int> triangles;     // 3T vertex ids
  std::vector<double> uv;         // 2N, each in [0,1]
  std::vector<int> landmark_ids;  // kNumLandmarks vertex ids
  std::vector<int> mirror;        // N, involutive

  UvAtlas atlas;  // built on load/creation, not serialized

  Vec3 vertex_mean(int i) const { return {mean_shape[3 * i], mean_shape[3 * i + 1], mean_shape[3 * i + 2]}; }
  Vec2 vertex_uv(int i) const { return {uv[2 * i], uv[2 * i + 1]}; }
};

// Directory layout: manifest.json naming raw little-endian float32/int32
// arrays.  Round-trips bit-exactly.
ModelBundle load_bundle(const std::string& dir);
void save_bundle(const std::string& dir, const ModelBundle& bundle);

// Consistency checks shared by load and the synthetic generator; throws with
// a distinct message per violation.
void validate_bundle(const ModelBundle& bundle);

UvAtlas build_uv_atlas(const ModelBundle& bundle, int res);

}  // namespace facefit
