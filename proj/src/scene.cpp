#include "facefit/scene.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "facefit/image.h"

namespace facefit {

namespace {
namespace fs = std::filesystem;
using nlohmann::json;
}  // namespace

UvSampleWeights uv_sample_weights(int res, double u, double v) {
  double tx = u * res - 0.5, ty = v * res - 0.5;
  double fx = std::floor(tx), fy = std::floor(ty);
  UvSampleWeights w;
  w.ax = tx - fx;
  w.ay = ty - fy;
  w.x0 = std::clamp(int(fx), 0, res - 1);
  w.x1 = std::clamp(int(fx) + 1, 0, res - 1);
  w.y0 = std::clamp(int(fy), 0, res - 1);
  w.y1 = std::clamp(int(fy) + 1, 0, res - 1);
  return w;
}

SceneParams SceneParams::init_for(const ModelBundle& bundle, double roughness_) {
  SceneParams p;
  p.alpha.assign(bundle.K_s, 0.0);
  p.delta.assign(bundle.K_e, 0.0);
  p.beta.assign(bundle.K_r, 0.0);
  p.roughness = roughness_;
  int res = bundle.texture_resolution;
  p.medium_diffuse = UvMap(res, 3, 0.0);
  p.medium_specular = UvMap(res, 3, 0.0);
  p.fine_diffuse = UvMap(res, 3, 0.0);
  p.fine_normal = UvMap(res, 3, 0.0);
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) p.fine_normal.at(x, y, 2) = 1.0;
  return p;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kCoarse: return "coarse";
    case Stage::kMedium: return "medium";
    default: return "fine";
  }
}

namespace {

std::vector<DiffValue> lift_block(Tape* tape, std::span<const double> values, const char* name,
                                  std::vector<std::pair<std::string, std::vector<std::uint32_t>>>& blocks) {
  std::vector<DiffValue> out(values.size());
  std::vector<std::uint32_t> ids(values.size(), kNoNode);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (tape) {
      ids[i] = tape->leaf();
      out[i] = DiffValue(values[i], ids[i]);
    } else {
      out[i] = DiffValue(values[i]);
    }
  }
  blocks.emplace_back(name, std::move(ids));
  return out;
}

UvMapD lift_map(Tape* tape, const UvMap& map, const char* name,
                std::vector<std::pair<std::string, std::vector<std::uint32_t>>>& blocks) {
  UvMapD out;
  out.res = map.res;
  out.channels = map.channels;
  std::vector<double> flat = map.data;
  std::vector<DiffValue> lifted = lift_block(tape, flat, name, blocks);
  out.data = std::move(lifted);
  return out;
}

SceneLift lift_impl(Tape* tape, const SceneParams& p) {
  SceneLift s;
  s.roughness = p.roughness;
  s.alpha = lift_block(tape, p.alpha, "alpha", s.blocks);
  s.delta = lift_block(tape, p.delta, "delta", s.blocks);
  s.beta = lift_block(tape, p.beta, "beta", s.blocks);
  double rot[3] = {p.rot.x, p.rot.y, p.rot.z};
  std::vector<DiffValue> r = lift_block(tape, rot, "rot", s.blocks);
  s.rot = {r[0], r[1], r[2]};
  double tr[3] = {p.trans.x, p.trans.y, p.trans.z};
  std::vector<DiffValue> t = lift_block(tape, tr, "trans", s.blocks);
  s.trans = {t[0], t[1], t[2]};
  std::vector<double> light(3 * kShCoeffs);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < kShCoeffs; ++i) light[c * kShCoeffs + i] = p.light.coeffs[c][i];
  std::vector<DiffValue> lv = lift_block(tape, light, "light", s.blocks);
  for (int c = 0; c < 3; ++c)
    s.light[c] = std::vector<DiffValue>(lv.begin() + c * kShCoeffs, lv.begin() + (c + 1) * kShCoeffs);
  s.medium_diffuse = lift_map(tape, p.medium_diffuse, "medium_diffuse", s.blocks);
  s.medium_specular = lift_map(tape, p.medium_specular, "medium_specular", s.blocks);
  s.fine_diffuse = lift_map(tape, p.fine_diffuse, "fine_diffuse", s.blocks);
  s.fine_normal = lift_map(tape, p.fine_normal, "fine_normal", s.blocks);
  return s;
}

}  // namespace

std::span<const std::uint32_t> SceneLift::block_ids(const std::string& name) const {
  for (const auto& [n, ids] : blocks)
    if (n == name) return ids;
  throw std::runtime_error("scene: unknown parameter block '" + name + "'");
}

SceneLift lift_scene(Tape& tape, const SceneParams& p) {
  Tape::Scope scope(tape);
  return lift_impl(&tape, p);
}

SceneLift lift_const_scene(const SceneParams& p) { return lift_impl(nullptr, p); }

std::span<double> block_view(SceneParams& p, const std::string& name) {
  if (name == "alpha") return p.alpha;
  if (name == "delta") return p.delta;
  if (name == "beta") return p.beta;
  if (name == "rot") return {&p.rot.x, 3};
  if (name == "trans") return {&p.trans.x, 3};
  if (name == "light") return {&p.light.coeffs[0][0], 3 * std::size_t(kShCoeffs)};
  if (name == "medium_diffuse") return p.medium_diffuse.data;
  if (name == "medium_specular") return p.medium_specular.data;
  if (name == "fine_diffuse") return p.fine_diffuse.data;
  if (name == "fine_normal") return p.fine_normal.data;
  throw std::runtime_error("scene: unknown parameter block '" + name + "'");
}

DMat3 rotation_matrix(const DVec3& aa) {
  // Exponential map; the small-angle branch works in theta^2, which stays
  // smooth through zero.
  DiffValue t2 = sq(aa.x) + sq(aa.y) + sq(aa.z);
  DiffValue a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (t2.v < 1e-12) {
    a = 1.0 - t2 * (1.0 / 6.0);
    b = 0.5 - t2 * (1.0 / 24.0);
  } else {
    DiffValue t = sqrt(t2);
    a = sin(t) / t;
    b = (1.0 - cos(t)) / t2;
  }
  DiffValue wx = aa.x, wy = aa.y, wz = aa.z;
  DMat3 m;
  m.c0 = {1.0 - b * (wy * wy + wz * wz), b * (wx * wy) + a * wz, b * (wx * wz) - a * wy};
  m.c1 = {b * (wx * wy) - a * wz, 1.0 - b * (wx * wx + wz * wz), b * (wy * wz) + a * wx};
  m.c2 = {b * (wx * wz) + a * wy, b * (wy * wz) - a * wx, 1.0 - b * (wx * wx + wy * wy)};
  return m;
}

CameraD make_camera(const SceneLift& lift, const CameraIntrinsics& k) {
  return {rotation_matrix(lift.rot), lift.trans, k};
}

Camera camera_values(const CameraD& cam) {
  Camera c;
  c.R = {value(cam.R.c0), value(cam.R.c1), value(cam.R.c2)};
  c.t = value(cam.t);
  c.k = cam.k;
  return c;
}

Projected project(const CameraD& cam, const DVec3& v) {
  DVec3 p = cam.R.tmul(v - cam.t);
  Projected out;
  out.z = p.z;
  out.behind = p.z.v <= 0.0;
  if (out.behind) {
    out.pixel = {DiffValue(-1e9), DiffValue(-1e9)};
    return out;
  }
  out.pixel = {cam.k.f * (p.x / p.z) + cam.k.cx, cam.k.f * (p.y / p.z) + cam.k.cy};
  return out;
}

ProjectedValue project(const Camera& cam, const Vec3& v) {
  Vec3 p = cam.R.tmul(v - cam.t);
  ProjectedValue out;
  out.z = p.z;
  out.behind = p.z <= 0.0;
  if (out.behind) {
    out.pixel = {-1e9, -1e9};
    return out;
  }
  // Same rounding order as the differentiable overload (whose division
  // multiplies by the reciprocal), keeping both paths bit-identical.
  double inv = 1.0 / p.z;
  out.pixel = {cam.k.f * (p.x * inv) + cam.k.cx, cam.k.f * (p.y * inv) + cam.k.cy};
  return out;
}

MeshD eval_geometry(const ModelBundle& bundle, const SceneLift& lift) {
  const int n = bundle.num_vertices;
  if (int(lift.alpha.size()) != bundle.K_s || int(lift.delta.size()) != bundle.K_e)
    throw std::runtime_error("scene: coefficient count does not match bundle");
  MeshD mesh;
  mesh.neutral.resize(n);
  mesh.vertices.resize(n);
  for (int i = 0; i < n; ++i) {
    DiffValue* slots[3] = {nullptr, nullptr, nullptr};
    DVec3& e = mesh.neutral[i];
    DVec3& v = mesh.vertices[i];
    slots[0] = &e.x; slots[1] = &e.y; slots[2] = &e.z;
    for (int c = 0; c < 3; ++c) {
      std::size_t row = std::size_t(3) * i + c;
      std::span<const double> sw(&bundle.shape_basis[row * bundle.K_s], bundle.K_s);
      *slots[c] = faffine(bundle.mean_shape[row], sw, lift.alpha);
      std::span<const double> ew(&bundle.expr_basis[row * bundle.K_e], bundle.K_e);
      DiffValue expr = faffine(0.0, ew, lift.delta);
      (c == 0 ? v.x : c == 1 ? v.y : v.z) = *slots[c] + expr;
    }
  }

  // Area-weighted vertex normals: accumulate unnormalized face cross
  // products, then normalize once per vertex.
  mesh.normals.assign(n, DVec3{DiffValue(0.0), DiffValue(0.0), DiffValue(0.0)});
  mesh.tangents.assign(n, DVec3{DiffValue(0.0), DiffValue(0.0), DiffValue(0.0)});
  for (int t = 0; t < bundle.num_triangles; ++t) {
    const int* idx = &bundle.triangles[3 * t];
    const DVec3& p0 = mesh.vertices[idx[0]];
    const DVec3& p1 = mesh.vertices[idx[1]];
    const DVec3& p2 = mesh.vertices[idx[2]];
    DVec3 fn = cross(p1 - p0, p2 - p0);  // length = 2 * area
    for (int k = 0; k < 3; ++k) mesh.normals[idx[k]] += fn;

    Vec2 w0 = bundle.vertex_uv(idx[0]), w1 = bundle.vertex_uv(idx[1]), w2 = bundle.vertex_uv(idx[2]);
    double du1 = w1.x - w0.x, dv1 = w1.y - w0.y;
    double du2 = w2.x - w0.x, dv2 = w2.y - w0.y;
    double det = du1 * dv2 - du2 * dv1;
    DVec3 e1 = p1 - p0, e2 = p2 - p0;
    DVec3 tan;
    if (std::fabs(det) > 1e-14) {
      double r = 1.0 / det;
      tan = e1 * (dv2 * r) + e2 * (-dv1 * r);
    } else {
      tan = e1;  // degenerate uv: any in-plane direction
    }
    for (int k = 0; k < 3; ++k) mesh.tangents[idx[k]] += tan;
  }
  mesh.bitangents.resize(n);
  for (int i = 0; i < n; ++i) {
    mesh.normals[i] = normalized(mesh.normals[i]);
    // Gram-Schmidt the accumulated tangent against the normal.
    DVec3 t = mesh.tangents[i] - mesh.normals[i] * dot(mesh.tangents[i], mesh.normals[i]);
    double len = norm(value(t));
    if (len < 1e-12) {
      // Normal-dominated accumulation; pick any stable perpendicular.
      Vec3 nv = value(mesh.normals[i]);
      Vec3 helper = std::fabs(nv.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
      t = cross(lift_const(helper), mesh.normals[i]);
    }
    mesh.tangents[i] = normalized(t);
    mesh.bitangents[i] = cross(mesh.normals[i], mesh.tangents[i]);
  }
  return mesh;
}

MeshValues mesh_values(const MeshD& mesh) {
  MeshValues mv;
  mv.vertices.resize(mesh.vertices.size());
  mv.normals.resize(mesh.normals.size());
  Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    mv.vertices[i] = value(mesh.vertices[i]);
    mv.normals[i] = value(mesh.normals[i]);
    lo = {std::min(lo.x, mv.vertices[i].x), std::min(lo.y, mv.vertices[i].y), std::min(lo.z, mv.vertices[i].z)};
    hi = {std::max(hi.x, mv.vertices[i].x), std::max(hi.y, mv.vertices[i].y), std::max(hi.z, mv.vertices[i].z)};
  }
  mv.scene_scale = norm(hi - lo);
  return mv;
}

AlbedosD eval_albedos(const ModelBundle& bundle, const SceneLift& lift) {
  if (int(lift.beta.size()) != bundle.K_r)
    throw std::runtime_error("scene: beta size does not match bundle");
  const int n = bundle.num_vertices;
  AlbedosD a;
  a.diffuse.resize(n);
  a.specular.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      std::size_t row = std::size_t(3) * i + c;
      std::span<const double> dw(&bundle.diffuse_basis[row * bundle.K_r], bundle.K_r);
      std::span<const double> sw(&bundle.specular_basis[row * bundle.K_r], bundle.K_r);
      DiffValue d = faffine(bundle.mean_diffuse[row], dw, lift.beta);
      DiffValue s = faffine(bundle.mean_specular[row], sw, lift.beta);
      (c == 0 ? a.diffuse[i].x : c == 1 ? a.diffuse[i].y : a.diffuse[i].z) = d;
      (c == 0 ? a.specular[i].x : c == 1 ? a.specular[i].y : a.specular[i].z) = s;
    }
  }
  return a;
}

namespace {

void write_map_pfm(const fs::path& dir, const char* name, const UvMap& map) {
  Image img(map.res, map.res, map.channels);
  for (std::size_t i = 0; i < map.data.size(); ++i) img.data[i] = float(map.data[i]);
  write_pfm((dir / name).string(), img);
}

UvMap read_map_pfm(const fs::path& dir, const char* name, int res) {
  Image img = read_pfm((dir / name).string());
  if (img.width != res || img.height != res)
    throw std::runtime_error("scene: map resolution mismatch in " + std::string(name));
  UvMap map(res, img.channels);
  for (std::size_t i = 0; i < map.data.size(); ++i) map.data[i] = img.data[i];
  return map;
}

}  // namespace

void save_params(const std::string& dir, const SceneParams& p) {
  fs::path root(dir);
  fs::create_directories(root);
  json j;
  j["alpha"] = p.alpha;
  j["delta"] = p.delta;
  j["beta"] = p.beta;
  j["rot"] = {p.rot.x, p.rot.y, p.rot.z};
  j["trans"] = {p.trans.x, p.trans.y, p.trans.z};
  j["roughness"] = p.roughness;
  for (int c = 0; c < 3; ++c)
    j["light"][c] = std::vector<double>(p.light.coeffs[c].begin(), p.light.coeffs[c].end());
  j["maps"] = {{"medium_diffuse", "medium_diffuse.pfm"},
               {"medium_specular", "medium_specular.pfm"},
               {"fine_diffuse", "fine_diffuse.pfm"},
               {"fine_normal", "fine_normal.pfm"}};
  std::ofstream out(root / "params.json");
  if (!out) throw std::runtime_error("scene: cannot write params.json in " + dir);
  out << j.dump(2) << "\n";
  write_map_pfm(root, "medium_diffuse.pfm", p.medium_diffuse);
  write_map_pfm(root, "medium_specular.pfm", p.medium_specular);
  write_map_pfm(root, "fine_diffuse.pfm", p.fine_diffuse);
  write_map_pfm(root, "fine_normal.pfm", p.fine_normal);
}

SceneParams load_params(const std::string& dir, const ModelBundle& bundle) {
  fs::path root(dir);
  std::ifstream in(root / "params.json");
  if (!in) throw std::runtime_error("scene: missing params.json in " + dir);
  json j;
  in >> j;
  SceneParams p = SceneParams::init_for(bundle, j.at("roughness").get<double>());
  p.alpha = j.at("alpha").get<std::vector<double>>();
  p.delta = j.at("delta").get<std::vector<double>>();
  p.beta = j.at("beta").get<std::vector<double>>();
  auto r = j.at("rot").get<std::vector<double>>();
  auto t = j.at("trans").get<std::vector<double>>();
  p.rot = {r.at(0), r.at(1), r.at(2)};
  p.trans = {t.at(0), t.at(1), t.at(2)};
  for (int c = 0; c < 3; ++c) {
    auto lc = j.at("light").at(c).get<std::vector<double>>();
    if (int(lc.size()) != kShCoeffs) throw std::runtime_error("scene: light coefficient count mismatch");
    std::copy(lc.begin(), lc.end(), p.light.coeffs[c].begin());
  }
  if (int(p.alpha.size()) != bundle.K_s || int(p.delta.size()) != bundle.K_e || int(p.beta.size()) != bundle.K_r)
    throw std::runtime_error("scene: coefficient counts do not match bundle");
  int res = bundle.texture_resolution;
  p.medium_diffuse = read_map_pfm(root, "medium_diffuse.pfm", res);
  p.medium_specular = read_map_pfm(root, "medium_specular.pfm", res);
  p.fine_diffuse = read_map_pfm(root, "fine_diffuse.pfm", res);
  p.fine_normal = read_map_pfm(root, "fine_normal.pfm", res);
  return p;
}

void write_obj(const std::string& path, const MeshValues& mesh, const ModelBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scene: cannot write " + path);
  out << "# " << mesh.vertices.size() << " vertices, " << bundle.num_triangles << " faces\n";
  for (const Vec3& v : mesh.vertices) out << "v " << v.x << " " << v.y << " " << v.z << "\n";
  for (int i = 0; i < bundle.num_vertices; ++i)
    out << "vt " << bundle.uv[2 * i] << " " << bundle.uv[2 * i + 1] << "\n";
  for (const Vec3& n : mesh.normals) out << "vn " << n.x << " " << n.y << " " << n.z << "\n";
  for (int t = 0; t < bundle.num_triangles; ++t) {
    const int* idx = &bundle.triangles[3 * t];
    out << "f";
    for (int k = 0; k < 3; ++k) out << " " << idx[k] + 1 << "/" << idx[k] + 1 << "/" << idx[k] + 1;
    out << "\n";
  }
}

}  // namespace facefit
