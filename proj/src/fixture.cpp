#include "facefit/fixture.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "facefit/raster.h"
#include "facefit/ray_renderer.h"
#include "facefit/rng.h"
#include "facefit/shading.h"
#include "facefit/surface.h"

namespace facefit {

namespace {

constexpr int kFaceGrid = 48;
constexpr int kFaceTexRes = 64;
constexpr double kTwoSqrtPi = 3.5449077018110318;  // DC coefficient of constant radiance 1

double gauss(double dx, double sx, double dy, double sy) {
  return std::exp(-(dx * dx) / (sx * sx) - (dy * dy) / (sy * sy));
}

// Face relief in mm; x symmetric by construction (only |x| and x^2 enter).
double face_height(double x, double y) {
  double ax = std::fabs(x);
  double r2 = (x / 85.0) * (x / 85.0) + (y / 105.0) * (y / 105.0);
  // Full paraboloid (no clipped skirt): a convex base sheet never occludes
  // itself, so analytic per-vertex shading and traced shading agree away from
  // the shallow features.  A clipped dome leaves a concave crease that puts
  // ambient shadow on the surrounding flat band.
  double z = -60.0 * (1.0 - r2);                        // dome toward the camera
  // Feature slopes stay gentle (amplitude / sigma well under 1): steep bumps
  // on the sheet would ambient-shadow their surroundings in the traced image,
  // which the shadow-free analytic vertex shading can never reproduce.
  z += -9.0 * gauss(x, 13.0, y - 18.0, 26.0);           // nose ridge
  z += -4.5 * gauss(x, 10.0, y - 25.0, 10.0);           // nose tip
  z += -3.5 * gauss(ax - 30.0, 13.0, y + 38.0, 8.0);    // brow ridges
  z += 2.5 * gauss(ax - 30.0, 13.0, y + 26.0, 9.0);     // eye sockets
  z += -3.0 * gauss(x, 24.0, y - 55.0, 9.0);            // lips
  z += -2.5 * gauss(ax - 45.0, 18.0, y - 20.0, 22.0);   // cheeks
  return z;
}

void grid_triangles(std::vector<int>& tris, int rows, int cols, int base, bool flip = false) {
  for (int j = 0; j + 1 < rows; ++j) {
    for (int i = 0; i + 1 < cols; ++i) {
      int a = base + j * cols + i;
      int b = a + 1;
      int c = a + cols;
      int d = c + 1;
      if (!flip) {
        tris.insert(tris.end(), {a, c, b});
        tris.insert(tris.end(), {b, c, d});
      } else {
        tris.insert(tris.end(), {a, b, c});
        tris.insert(tris.end(), {b, d, c});
      }
    }
  }
}

// 68 feature positions in normalized face coordinates (u right, v down).
std::vector<Vec2> landmark_layout() {
  std::vector<Vec2> pts;
  for (int k = 0; k < 17; ++k) {  // jaw sweep
    double t = double(k) / 16.0;
    double a = (0.12 + 0.76 * t) * 3.14159265358979;
    pts.push_back({0.5 + 0.38 * std::cos(a), 0.52 + 0.34 * std::sin(a)});
  }
  for (int s = 0; s < 2; ++s)  // brows
    for (int k = 0; k < 5; ++k) {
      double u = s == 0 ? 0.22 + 0.05 * k : 0.58 + 0.05 * k;
      pts.push_back({u, 0.31});
    }
  for (int k = 0; k < 4; ++k) pts.push_back({0.5, 0.38 + 0.047 * k});  // nose bridge
  for (int k = 0; k < 5; ++k) pts.push_back({0.42 + 0.04 * k, 0.57});  // nose base
  for (int s = 0; s < 2; ++s)  // eyes
    for (int k = 0; k < 6; ++k) {
      double a = 2.0 * 3.14159265358979 * k / 6.0;
      double cx = s == 0 ? 0.32 : 0.68;
      pts.push_back({cx + 0.06 * std::cos(a), 0.36 + 0.03 * std::sin(a)});
    }
  for (int k = 0; k < 12; ++k) {  // outer mouth
    double a = 2.0 * 3.14159265358979 * k / 12.0;
    pts.push_back({0.5 + 0.13 * std::cos(a), 0.72 + 0.05 * std::sin(a)});
  }
  for (int k = 0; k < 8; ++k) {  // inner mouth
    double a = 2.0 * 3.14159265358979 * k / 8.0;
    pts.push_back({0.5 + 0.08 * std::cos(a), 0.72 + 0.02 * std::sin(a)});
  }
  return pts;
}

std::vector<int> pick_landmark_ids(int grid) {
  std::vector<Vec2> layout = landmark_layout();
  std::set<int> used;
  std::vector<int> ids;
  for (const Vec2& p : layout) {
    int i = std::clamp(int(std::lround(p.x * (grid - 1))), 1, grid - 2);
    int j = std::clamp(int(std::lround(p.y * (grid - 1))), 1, grid - 2);
    int id = j * grid + i;
    while (used.count(id)) ++id;  // spill to the next vertex on collision
    used.insert(id);
    ids.push_back(id);
  }
  return ids;
}

// Smooth sinusoidal displacement/color fields as basis columns.
void fill_basis(std::vector<double>& basis, int n, int K, std::uint64_t seed, double amp0,
                double decay, const std::vector<double>& uvn) {
  basis.assign(std::size_t(3) * n * K, 0.0);
  for (int k = 0; k < K; ++k) {
    Rng rng = Rng::keyed(seed, 7, std::uint64_t(k), 0);
    double fu = 0.5 + 2.0 * rng.next_double();
    double fv = 0.5 + 2.0 * rng.next_double();
    double pu = 6.2831853 * rng.next_double();
    double pv = 6.2831853 * rng.next_double();
    int axis = int(rng.next_below(3));
    double amp = amp0 * std::pow(decay, k);
    for (int v = 0; v < n; ++v) {
      double s = std::sin(3.14159265 * fu * uvn[2 * v] + pu) *
                 std::cos(3.14159265 * fv * uvn[2 * v + 1] + pv);
      basis[(std::size_t(3) * v + axis) * K + k] = amp * s;
      // A faint coupling into the next axis keeps columns from being axis-pure.
      basis[(std::size_t(3) * v + (axis + 1) % 3) * K + k] = 0.3 * amp * s;
    }
  }
}

}  // namespace

// The bundle directory format stores arrays as float32; snapping the
// freshly generated doubles to that precision up front makes a generated
// bundle indistinguishable from its own save/load round trip.
static void snap_to_storage(ModelBundle& b) {
  for (auto* arr : {&b.mean_shape, &b.shape_basis, &b.expr_basis, &b.mean_diffuse,
                    &b.diffuse_basis, &b.mean_specular, &b.specular_basis,
                    &b.prior_var_shape, &b.prior_var_refl, &b.uv})
    for (double& v : *arr) v = double(float(v));
}

ModelBundle make_face_bundle(std::uint64_t seed, bool with_blocker) {
  const int G = kFaceGrid;
  ModelBundle b;
  b.K_s = 8;
  b.K_e = 6;
  b.K_r = 8;
  b.texture_resolution = kFaceTexRes;

  const double half = (G - 1) / 2.0;
  const double sx = 160.0 / (G - 1);
  const double sy = 200.0 / (G - 1);
  const double face_v_span = with_blocker ? 0.84 : 1.0;

  std::vector<double> uvn;  // normalized grid coords for basis synthesis
  for (int j = 0; j < G; ++j) {
    for (int i = 0; i < G; ++i) {
      double x = (i - half) * sx;  // exactly antisymmetric across the midline
      double y = (j - half) * sy;
      b.mean_shape.insert(b.mean_shape.end(), {x, y, face_height(x, y)});
      b.uv.insert(b.uv.end(), {double(i) / (G - 1), face_v_span * double(j) / (G - 1)});
      uvn.insert(uvn.end(), {double(i) / (G - 1), double(j) / (G - 1)});
    }
  }
  grid_triangles(b.triangles, G, G, 0);

  int face_n = G * G;
  std::vector<int> mirror(face_n);
  for (int j = 0; j < G; ++j)
    for (int i = 0; i < G; ++i) mirror[j * G + i] = j * G + (G - 1 - i);

  if (with_blocker) {
    // Thin slab beyond the +x rim: edge-on to the camera, square to the
    // bright side of the light, so it shades the near cheek without hiding it.
    const int BR = 8, BC = 16;
    int base = face_n;
    for (int i = 0; i < BR; ++i) {
      for (int j = 0; j < BC; ++j) {
        double z = -95.0 + 80.0 * double(i) / (BR - 1);
        double y = -60.0 + 120.0 * double(j) / (BC - 1);
        b.mean_shape.insert(b.mean_shape.end(), {85.0, y, z});
        b.uv.insert(b.uv.end(),
                    {0.3 + 0.4 * double(j) / (BC - 1), 0.86 + 0.14 * double(i) / (BR - 1)});
        uvn.insert(uvn.end(), {double(j) / (BC - 1), double(i) / (BR - 1)});
        mirror.push_back(base + i * BC + j);  // the slab is its own mirror
      }
    }
    grid_triangles(b.triangles, BR, BC, base);
  }

  b.num_vertices = int(b.mean_shape.size() / 3);
  b.num_triangles = int(b.triangles.size() / 3);
  b.mirror = mirror;
  b.landmark_ids = pick_landmark_ids(G);

  fill_basis(b.shape_basis, b.num_vertices, b.K_s, seed ^ 0x51ab, 6.0, 0.85, uvn);
  fill_basis(b.expr_basis, b.num_vertices, b.K_e, seed ^ 0xe239, 4.0, 0.85, uvn);
  fill_basis(b.diffuse_basis, b.num_vertices, b.K_r, seed ^ 0xd1ff, 0.05, 0.9, uvn);
  fill_basis(b.specular_basis, b.num_vertices, b.K_r, seed ^ 0x5bec, 0.02, 0.9, uvn);
  if (with_blocker) {
    // Morphs must not move or tint the slab.
    auto zero_rows = [&](std::vector<double>& basis, int K) {
      for (int v = face_n; v < b.num_vertices; ++v)
        for (int c = 0; c < 3; ++c)
          for (int k = 0; k < K; ++k) basis[(std::size_t(3) * v + c) * K + k] = 0.0;
    };
    zero_rows(b.shape_basis, b.K_s);
    zero_rows(b.expr_basis, b.K_e);
    zero_rows(b.diffuse_basis, b.K_r);
    zero_rows(b.specular_basis, b.K_r);
  }

  b.mean_diffuse.resize(std::size_t(3) * b.num_vertices);
  b.mean_specular.resize(std::size_t(3) * b.num_vertices);
  for (int v = 0; v < b.num_vertices; ++v) {
    double u = uvn[2 * v], w = uvn[2 * v + 1];
    double warm = 0.03 * std::sin(6.2 * u) * std::cos(4.1 * w);
    b.mean_diffuse[3 * v + 0] = 0.62 + warm;
    b.mean_diffuse[3 * v + 1] = 0.44 + 0.6 * warm;
    b.mean_diffuse[3 * v + 2] = 0.34 + 0.3 * warm;
    // Skin-scale specular weight.  The analytic specular term integrates the
    // full reflection lobe while the traced estimator shadow-tests it, so at
    // grazing angles the two disagree by a fraction of the lobe; keeping the
    // weight small keeps that disagreement under the sampler noise floor.
    for (int c = 0; c < 3; ++c) b.mean_specular[3 * v + c] = 0.06;
  }

  b.prior_var_shape.assign(b.K_s, 0.0);
  for (int k = 0; k < b.K_s; ++k) b.prior_var_shape[k] = std::pow(0.9, k);
  b.prior_var_refl.assign(b.K_r, 0.0);
  for (int k = 0; k < b.K_r; ++k) b.prior_var_refl[k] = std::pow(0.9, k);

  snap_to_storage(b);
  b.atlas = build_uv_atlas(b, b.texture_resolution);
  validate_bundle(b);
  return b;
}

ModelBundle make_sphere_bundle(double radius, double diffuse_albedo, double specular_albedo) {
  const int R = 24, S = 48;
  ModelBundle b;
  b.K_s = 1;
  b.K_e = 1;
  b.K_r = 1;
  b.texture_resolution = 32;
  for (int r = 0; r <= R; ++r) {
    double th = 3.14159265358979 * r / R;
    for (int s = 0; s <= S; ++s) {
      double ph = 2.0 * 3.14159265358979 * s / S;
      b.mean_shape.insert(b.mean_shape.end(), {radius * std::sin(th) * std::cos(ph),
                                               radius * std::sin(th) * std::sin(ph),
                                               radius * std::cos(th)});
      b.uv.insert(b.uv.end(), {double(s) / S, double(r) / R});
    }
  }
  int cols = S + 1;
  for (int r = 0; r < R; ++r) {
    for (int s = 0; s < S; ++s) {
      int a = r * cols + s, bq = a + 1, c = a + cols, d = c + 1;
      if (r > 0) b.triangles.insert(b.triangles.end(), {a, c, bq});
      if (r + 1 < R) b.triangles.insert(b.triangles.end(), {bq, c, d});
    }
  }
  b.num_vertices = int(b.mean_shape.size() / 3);
  b.num_triangles = int(b.triangles.size() / 3);
  b.mirror.resize(b.num_vertices);
  for (int i = 0; i < b.num_vertices; ++i) b.mirror[i] = i;

  // Spread ids over the camera-facing half (camera looks along +z from -z).
  std::set<int> used;
  for (int k = 0; k < kNumLandmarks; ++k) {
    int r = R / 2 + 2 + (k * 3) % (R / 2 - 3);
    int s = (k * 7) % S;
    int id = r * cols + s;
    while (used.count(id)) ++id;
    used.insert(id);
    b.landmark_ids.push_back(id);
  }

  std::size_t n3 = std::size_t(3) * b.num_vertices;
  b.shape_basis.assign(n3 * b.K_s, 0.0);
  b.expr_basis.assign(n3 * b.K_e, 0.0);
  b.diffuse_basis.assign(n3 * b.K_r, 0.0);
  b.specular_basis.assign(n3 * b.K_r, 0.0);
  b.mean_diffuse.assign(n3, diffuse_albedo);
  b.mean_specular.assign(n3, specular_albedo);
  b.prior_var_shape.assign(b.K_s, 1.0);
  b.prior_var_refl.assign(b.K_r, 1.0);
  snap_to_storage(b);
  b.atlas = build_uv_atlas(b, b.texture_resolution);
  validate_bundle(b);
  return b;
}

namespace {

void set_gradient_light(SHLight& light, double level, double slope_x, double tint_g,
                        double tint_b) {
  // Radiance(d) = level * tint_c * (1 + slope_x * d.x); index 3 is the
  // x-linear basis function with weight 0.48860251.
  double tint[3] = {1.0, tint_g, tint_b};
  for (int c = 0; c < 3; ++c) {
    double dc = kTwoSqrtPi * level * tint[c];
    light.coeffs[c][0] = dc;
    light.coeffs[c][3] = slope_x * dc * 0.28209479177387814 / 0.4886025119029199;
  }
}

// Reference shading-normal image of the ground-truth scene plus mask.
RenderOutput render_reference(const ModelBundle& bundle, const SceneParams& gt,
                              const CameraIntrinsics& intr, int spp, std::uint64_t seed,
                              bool shadow_test) {
  return trace(bundle, gt, intr, spp, seed, shadow_test);
}

std::vector<Vec2> project_landmarks(const ModelBundle& bundle, const SceneParams& gt,
                                    const CameraIntrinsics& intr) {
  SceneLift lift = lift_const_scene(gt);
  MeshValues mesh = mesh_values(eval_geometry(bundle, lift));
  Camera cam = camera_values(make_camera(lift, intr));
  std::vector<Vec2> out;
  for (int id : bundle.landmark_ids) {
    ProjectedValue pv = project(cam, mesh.vertices[id]);
    if (pv.behind) throw std::runtime_error("fixture: landmark behind camera");
    out.push_back(pv.pixel);
  }
  return out;
}

// Mirrored-pair blotch field so the symmetry prior holds for the truth.
void add_symmetric_blotches(UvMap& map, std::uint64_t seed, int count, double amp) {
  Rng rng = Rng::keyed(seed, 0xb107, 0, 0);
  int res = map.res;
  for (int k = 0; k < count; ++k) {
    double cx = 0.1 + 0.35 * rng.next_double();  // left half; the pair mirrors it
    double cy = 0.1 + 0.8 * rng.next_double();
    double rad = (0.05 + 0.08 * rng.next_double()) * res;
    double a = amp * (rng.next_double() * 2.0 - 1.0);
    double cr = 1.0 + 0.4 * (rng.next_double() - 0.5);
    double cg = 1.0 + 0.4 * (rng.next_double() - 0.5);
    double cb = 1.0 + 0.4 * (rng.next_double() - 0.5);
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        double gl = gauss(x - cx * res, rad, y - cy * res, rad);
        double gr = gauss((res - 1 - x) - cx * res, rad, y - cy * res, rad);
        double g = a * (gl + gr);
        map.at(x, y, 0) += g * cr;
        map.at(x, y, 1) += g * cg;
        map.at(x, y, 2) += g * cb;
      }
    }
  }
}

// Horizontal wrinkle bands in tangent space, windowed to two face regions.
void add_wrinkles(UvMap& normal_map, double amp, double wavelength) {
  int res = normal_map.res;
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      double u = (x + 0.5) / res, v = (y + 0.5) / res;
      double forehead = gauss(u - 0.5, 0.30, v - 0.20, 0.10);
      double mouth = gauss(u - 0.5, 0.22, v - 0.74, 0.07);
      double window = std::min(1.0, forehead + mouth);
      double phase = 2.0 * 3.14159265358979 * (y + 0.5) / wavelength;
      double ny = amp * window * std::sin(phase);
      double nx = 0.35 * amp * window * std::sin(phase * 0.5 + 1.3 * u * 6.28318);
      Vec3 n = normalized(Vec3{nx, ny, 1.0});
      normal_map.at(x, y, 0) = n.x;
      normal_map.at(x, y, 1) = n.y;
      normal_map.at(x, y, 2) = n.z;
    }
  }
}

// Per-texel diffuse shading (unit albedo) of the ground-truth scene, as a
// zero-mean luminance field over atlas-covered texels.
UvMap shading_field(const ModelBundle& bundle, const SceneParams& gt) {
  SceneLift lift = lift_const_scene(gt);
  CameraIntrinsics intr;  // shading needs no camera; placeholder
  SceneEval se = make_scene_eval(bundle, lift, intr);
  const UvAtlas& atlas = bundle.atlas;
  UvMap field(atlas.res, 1, 0.0);
  double mean = 0.0;
  int count = 0;
  for (int y = 0; y < atlas.res; ++y) {
    for (int x = 0; x < atlas.res; ++x) {
      if (!atlas.valid(x, y)) continue;
      int tri = atlas.tri[std::size_t(y) * atlas.res + x];
      double b1 = atlas.bary[(std::size_t(y) * atlas.res + x) * 3 + 1];
      double b2 = atlas.bary[(std::size_t(y) * atlas.res + x) * 3 + 2];
      SurfacePointD sp = eval_surface_point(se, tri, b1, b2);
      DVec3 sh = shade_diffuse(se.conv_light, sp.shading_normal, DVec3{1.0, 1.0, 1.0});
      double l = luminance(sh.x.v, sh.y.v, sh.z.v);
      field.at(x, y, 0) = l;
      mean += l;
      ++count;
    }
  }
  mean /= std::max(1, count);
  for (int y = 0; y < atlas.res; ++y)
    for (int x = 0; x < atlas.res; ++x)
      if (atlas.valid(x, y)) field.at(x, y, 0) = field.at(x, y, 0) / mean - 1.0;
  return field;
}

}  // namespace

Fixture make_fixture(const std::string& kind, std::uint64_t seed, int spp) {
  if (spp < 1) throw std::runtime_error("fixture: spp must be >= 1");
  Fixture f;
  f.kind = kind;
  f.seed = seed;
  f.spp = spp;

  if (kind == "sphere-furnace" || kind == "sphere-bridge") {
    bool furnace = kind == "sphere-furnace";
    f.bundle = make_sphere_bundle(80.0, furnace ? 1.0 : 0.8, furnace ? 0.0 : 0.3);
    f.gt = SceneParams::init_for(f.bundle, 0.35);
    if (furnace) {
      for (int c = 0; c < 3; ++c) f.gt.light.coeffs[c][0] = kTwoSqrtPi;
    } else {
      set_gradient_light(f.gt.light, 0.9, 0.2, 1.0, 1.0);
    }
    f.gt.trans = Vec3{0, 0, -700};
    f.intr.f = 460.0;
    f.intr.width = 128;
    f.intr.height = 128;
    f.intr.cx = 64.0;
    f.intr.cy = 64.0;
  } else if (kind == "face" || kind == "face-blocker" || kind == "face-shading") {
    f.bundle = make_face_bundle(seed, kind == "face-blocker");
    f.gt = SceneParams::init_for(f.bundle, 0.35);
    Rng rng = Rng::keyed(seed, 11, 0, 0);
    for (double& a : f.gt.alpha) a = 0.5 * rng.normal();
    for (double& d : f.gt.delta) d = 0.6 * rng.next_double();
    for (double& b : f.gt.beta) b = 0.4 * rng.normal();
    f.gt.rot = Vec3{0.02, -0.03, 0.015};
    f.gt.trans = Vec3{4.0, -3.0, -890.0};
    if (kind == "face-shading") {
      set_gradient_light(f.gt.light, 0.95, 0.35, 0.98, 0.94);
    } else if (kind == "face-blocker") {
      set_gradient_light(f.gt.light, 0.95, 0.45, 0.98, 0.94);
    } else {
      set_gradient_light(f.gt.light, 0.95, 0.25, 0.98, 0.94);
      // A touch of second-band structure so the light fit is not trivial.
      for (int c = 0; c < 3; ++c) f.gt.light.coeffs[c][6] = 0.08 * f.gt.light.coeffs[c][0] * 0.1;
    }
    if (kind == "face") {
      add_symmetric_blotches(f.gt.medium_diffuse, seed, 5, 0.028);
      add_wrinkles(f.gt.fine_normal, 0.18, 8.0);
    }
    if (kind == "face-shading") {
      UvMap field = shading_field(f.bundle, f.gt);
      f.shading_pattern = field;
      for (int y = 0; y < field.res; ++y)
        for (int x = 0; x < field.res; ++x)
          for (int c = 0; c < 3; ++c)
            f.gt.medium_diffuse.at(x, y, c) = 0.25 * field.at(x, y, 0);
    }
    f.intr.f = 460.0;
    f.intr.width = 128;
    f.intr.height = 128;
    f.intr.cx = 64.0;
    f.intr.cy = 64.0;
  } else {
    throw std::runtime_error("fixture: unknown kind '" + kind + "'");
  }

  // Reconstruction fixtures get occlusion-free targets: the per-vertex
  // analytic shading can only express unshadowed convolution lighting, so a
  // self-shadowed target would put an irreducible, spatially coherent
  // residual under the pose and geometry gradients.  The blocker fixture
  // exists to exercise shadows and keeps them.
  bool shadow_test = (kind == "face-blocker");
  RenderOutput ref = render_reference(f.bundle, f.gt, f.intr, spp, seed ^ 0x7a26e7, shadow_test);
  f.target = ref.image;
  f.gt_normal = ref.normal;
  f.gt_mask = ref.mask;
  f.landmarks = project_landmarks(f.bundle, f.gt, f.intr);
  return f;
}

void save_fixture(const std::string& dir, const Fixture& f) {
  std::filesystem::create_directories(dir);
  save_bundle(dir + "/bundle", f.bundle);
  std::filesystem::create_directories(dir + "/gt");
  save_params(dir + "/gt", f.gt);
  write_pfm(dir + "/target.pfm", f.target);
  write_png(dir + "/target.png", tonemap(f.target));
  write_pfm(dir + "/gt_normal.pfm", f.gt_normal);
  write_pfm(dir + "/gt_mask.pfm", f.gt_mask);
  save_landmarks(dir + "/landmarks.txt", f.landmarks);
  {
    SceneLift lift = lift_const_scene(f.gt);
    MeshValues mesh = mesh_values(eval_geometry(f.bundle, lift));
    write_obj(dir + "/gt_mesh.obj", mesh, f.bundle);
  }
  if (!f.shading_pattern.empty()) {
    Image img(f.shading_pattern.res, f.shading_pattern.res, 1);
    for (int y = 0; y < f.shading_pattern.res; ++y)
      for (int x = 0; x < f.shading_pattern.res; ++x)
        img.at(x, y, 0) = float(f.shading_pattern.at(x, y, 0));
    write_pfm(dir + "/shading_pattern.pfm", img);
  }
  nlohmann::json j;
  j["kind"] = f.kind;
  j["seed"] = f.seed;
  j["spp"] = f.spp;
  j["width"] = f.intr.width;
  j["height"] = f.intr.height;
  j["focal"] = f.intr.f;
  j["cx"] = f.intr.cx;
  j["cy"] = f.intr.cy;
  std::ofstream out(dir + "/fixture.json");
  if (!out) throw std::runtime_error("fixture: cannot write fixture.json in " + dir);
  out << j.dump(2) << "\n";
}

Fixture load_fixture(const std::string& dir) {
  std::ifstream in(dir + "/fixture.json");
  if (!in) throw std::runtime_error("fixture: missing fixture.json in " + dir);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("fixture: malformed fixture.json in " + dir + ": " + e.what());
  }
  Fixture f;
  f.kind = j.at("kind").get<std::string>();
  f.seed = j.at("seed").get<std::uint64_t>();
  f.spp = j.at("spp").get<int>();
  f.intr.width = j.at("width").get<int>();
  f.intr.height = j.at("height").get<int>();
  f.intr.f = j.at("focal").get<double>();
  f.intr.cx = j.at("cx").get<double>();
  f.intr.cy = j.at("cy").get<double>();
  f.bundle = load_bundle(dir + "/bundle");
  f.gt = load_params(dir + "/gt", f.bundle);
  f.target = read_pfm(dir + "/target.pfm");
  f.gt_normal = read_pfm(dir + "/gt_normal.pfm");
  f.gt_mask = read_pfm(dir + "/gt_mask.pfm");
  f.landmarks = load_landmarks(dir + "/landmarks.txt");
  if (std::filesystem::exists(dir + "/shading_pattern.pfm")) {
    Image img = read_pfm(dir + "/shading_pattern.pfm");
    f.shading_pattern = UvMap(img.width, 1, 0.0);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) f.shading_pattern.at(x, y, 0) = img.at(x, y, 0);
  }
  return f;
}

SceneParams perturb_params(const ModelBundle& bundle, const SceneParams& base, std::uint64_t seed,
                           double scale) {
  SceneParams p = base;
  Rng rng = Rng::keyed(seed, 0x9e27, 0, 0);
  for (double& a : p.alpha) a += scale * 0.1 * rng.normal();
  for (double& d : p.delta) d += scale * 0.1 * rng.normal();
  for (double& b : p.beta) b += scale * 0.1 * rng.normal();
  p.rot.x += scale * 0.02 * rng.normal();
  p.rot.y += scale * 0.02 * rng.normal();
  p.rot.z += scale * 0.02 * rng.normal();
  p.trans.x += scale * 5.0 * rng.normal();
  p.trans.y += scale * 5.0 * rng.normal();
  p.trans.z += scale * 5.0 * rng.normal();
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < kShCoeffs; ++k) p.light.coeffs[c][k] += scale * 0.05 * rng.normal();
  auto jitter_map = [&](UvMap& m, double s) {
    for (double& v : m.data) v += scale * s * rng.normal();
  };
  jitter_map(p.medium_diffuse, 0.02);
  jitter_map(p.medium_specular, 0.02);
  jitter_map(p.fine_diffuse, 0.02);
  for (int y = 0; y < p.fine_normal.res; ++y) {
    for (int x = 0; x < p.fine_normal.res; ++x) {
      Vec3 n{p.fine_normal.at(x, y, 0) + scale * 0.05 * rng.normal(),
             p.fine_normal.at(x, y, 1) + scale * 0.05 * rng.normal(),
             p.fine_normal.at(x, y, 2)};
      n = normalized(n);
      n.z = std::max(n.z, 0.05);
      n = normalized(n);
      p.fine_normal.at(x, y, 0) = n.x;
      p.fine_normal.at(x, y, 1) = n.y;
      p.fine_normal.at(x, y, 2) = n.z;
    }
  }
  return p;
}

}  // namespace facefit
