#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "facefit/bundle.h"
#include "facefit/diff.h"
#include "facefit/sh.h"

namespace facefit {

// Per-texel storage, row-major, `channels` interleaved.
template <class T>
struct UvMapT {
  int res = 0, channels = 0;
  std::vector<T> data;

  UvMapT() = default;
  UvMapT(int r, int c, T fill = T{}) : res(r), channels(c), data(std::size_t(r) * r * c, fill) {}
  T& at(int x, int y, int c) { return data[(std::size_t(y) * res + x) * channels + c]; }
  const T& at(int x, int y, int c) const { return data[(std::size_t(y) * res + x) * channels + c]; }
  bool empty() const { return data.empty(); }
};
using UvMap = UvMapT<double>;
using UvMapD = UvMapT<DiffValue>;

// Bilinear, clamp-to-edge, texel centers at ((x+0.5)/res, (y+0.5)/res).
struct UvSampleWeights {
  int x0, x1, y0, y1;
  double ax, ay;
};
UvSampleWeights uv_sample_weights(int res, double u, double v);

template <class T>
T sample_uv_map(const UvMapT<T>& map, double u, double v, int c) {
  UvSampleWeights w = uv_sample_weights(map.res, u, v);
  T top = map.at(w.x0, w.y0, c) * (1.0 - w.ax) + map.at(w.x1, w.y0, c) * w.ax;
  T bot = map.at(w.x0, w.y1, c) * (1.0 - w.ax) + map.at(w.x1, w.y1, c) * w.ax;
  return top * (1.0 - w.ay) + bot * w.ay;
}

// Everything the fit optimizes.  Maps hold deltas on top of the statistical
// albedos; the detail normal map stores tangent-space unit vectors (+z up)
// and is renormalized wherever it is used.
struct SceneParams {
  std::vector<double> alpha, delta, beta;
  Vec3 rot{0, 0, 0};    // axis-angle
  Vec3 trans{0, 0, 0};  // camera center in world space
  SHLight light;
  double roughness = 0.35;
  UvMap medium_diffuse, medium_specular;  // 3ch deltas
  UvMap fine_diffuse;                     // 3ch delta
  UvMap fine_normal;                      // 3ch tangent-space vectors

  static SceneParams init_for(const ModelBundle& bundle, double roughness);
};

void save_params(const std::string& dir, const SceneParams& p);
SceneParams load_params(const std::string& dir, const ModelBundle& bundle);

enum class Stage { kCoarse = 0, kMedium = 1, kFine = 2 };
const char* stage_name(Stage s);

// SceneParams lifted onto a tape: every entry becomes a leaf node, grouped in
// named blocks so gradients can be gathered per block.
struct SceneLift {
  std::vector<DiffValue> alpha, delta, beta;
  DVec3 rot, trans;
  std::array<std::vector<DiffValue>, 3> light;  // [channel][81]
  double roughness = 0.35;
  UvMapD medium_diffuse, medium_specular, fine_diffuse, fine_normal;

  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> blocks;
  std::span<const std::uint32_t> block_ids(const std::string& name) const;
};

inline const char* kBlockNames[] = {"alpha", "delta", "beta",        "rot",         "trans",
                                    "light", "medium_diffuse", "medium_specular", "fine_diffuse", "fine_normal"};

SceneLift lift_scene(Tape& tape, const SceneParams& p);
// Lift with no tape: constants only, same values (for plain evaluation).
SceneLift lift_const_scene(const SceneParams& p);

// Write adjusted values back / apply an update to one block.
std::span<double> block_view(SceneParams& p, const std::string& name);

struct CameraIntrinsics {
  double f = 460.0, cx = 64.0, cy = 64.0;
  int width = 128, height = 128;
};

// World-to-camera p_cam = R^T (v - t); pixel = (f*x/z + cx, f*y/z + cy).
struct CameraD {
  DMat3 R;
  DVec3 t;
  CameraIntrinsics k;
};
struct Camera {
  Mat3 R;
  Vec3 t;
  CameraIntrinsics k;
};

DMat3 rotation_matrix(const DVec3& axis_angle);
CameraD make_camera(const SceneLift& lift, const CameraIntrinsics& k);
Camera camera_values(const CameraD& cam);

struct Projected {
  DVec2 pixel;
  DiffValue z;      // camera-space depth
  bool behind;      // z <= 0: pixel is meaningless
};
Projected project(const CameraD& cam, const DVec3& v);

struct ProjectedValue {
  Vec2 pixel;
  double z;
  bool behind;
};
ProjectedValue project(const Camera& cam, const Vec3& v);

// Evaluated morphable geometry: world-space positions, area-weighted vertex
// normals and uv-aligned tangent frames, all differentiable.
struct MeshD {
  std::vector<DVec3> neutral;   // a_s + shape_basis * alpha
  std::vector<DVec3> vertices;  // neutral + expr_basis * delta
  std::vector<DVec3> normals;   // unit
  std::vector<DVec3> tangents, bitangents;
};
struct MeshValues {
  std::vector<Vec3> vertices, normals;
  double scene_scale = 0.0;  // bounding-box diagonal
};

MeshD eval_geometry(const ModelBundle& bundle, const SceneLift& lift);
MeshValues mesh_values(const MeshD& mesh);

// Per-vertex statistical albedos from beta (not clamped; render-time clamps).
struct AlbedosD {
  std::vector<DVec3> diffuse, specular;
};
AlbedosD eval_albedos(const ModelBundle& bundle, const SceneLift& lift);

void write_obj(const std::string& path, const MeshValues& mesh, const ModelBundle& bundle);

}  // namespace facefit
