#include "facefit/surface.h"

#include <array>

namespace facefit {

SceneEval make_scene_eval(const ModelBundle& bundle, const SceneLift& lift,
                          const CameraIntrinsics& k) {
  SceneEval se;
  se.bundle = &bundle;
  se.lift = &lift;
  se.mesh = eval_geometry(bundle, lift);
  se.values = mesh_values(se.mesh);
  se.albedos = eval_albedos(bundle, lift);
  se.camera = make_camera(lift, k);
  se.camera_v = camera_values(se.camera);
  se.kernels = make_kernels(lift.roughness);
  se.conv_light = convolve_light(lift.light, se.kernels);
  se.env = bake_envmap(lift.light);
  return se;
}

namespace {

DiffValue blend3(double b0, double b1, double b2, const DiffValue& x0, const DiffValue& x1,
                 const DiffValue& x2) {
  const double w[3] = {b0, b1, b2};
  const DiffValue x[3] = {x0, x1, x2};
  return faffine(0.0, w, x);
}

DVec3 blend3(double b0, double b1, double b2, const DVec3& a, const DVec3& b, const DVec3& c) {
  return {blend3(b0, b1, b2, a.x, b.x, c.x), blend3(b0, b1, b2, a.y, b.y, c.y),
          blend3(b0, b1, b2, a.z, b.z, c.z)};
}

// Fused bilinear map fetch: one tape node per channel.
DiffValue sample_map(const UvMapD& map, const UvSampleWeights& w, int c) {
  const double ws[4] = {(1.0 - w.ax) * (1.0 - w.ay), w.ax * (1.0 - w.ay), (1.0 - w.ax) * w.ay,
                        w.ax * w.ay};
  const DiffValue xs[4] = {map.at(w.x0, w.y0, c), map.at(w.x1, w.y0, c), map.at(w.x0, w.y1, c),
                           map.at(w.x1, w.y1, c)};
  return faffine(0.0, ws, xs);
}

DVec3 sample_map3(const UvMapD& map, const UvSampleWeights& w) {
  return {sample_map(map, w, 0), sample_map(map, w, 1), sample_map(map, w, 2)};
}

DVec3 clamp01v(const DVec3& a) { return {clamp01(a.x), clamp01(a.y), clamp01(a.z)}; }

SurfacePointD eval_surface_impl(const SceneEval& se, const int* idx, double b0, double b1,
                                double b2, Vec2 uv) {
  const SceneLift& lift = *se.lift;
  SurfacePointD sp;
  sp.uv = uv;

  sp.position = blend3(b0, b1, b2, se.mesh.vertices[idx[0]], se.mesh.vertices[idx[1]],
                       se.mesh.vertices[idx[2]]);
  DVec3 n_raw = blend3(b0, b1, b2, se.mesh.normals[idx[0]], se.mesh.normals[idx[1]],
                       se.mesh.normals[idx[2]]);
  sp.geo_normal = normalized(n_raw);
  DVec3 tangent = blend3(b0, b1, b2, se.mesh.tangents[idx[0]], se.mesh.tangents[idx[1]],
                         se.mesh.tangents[idx[2]]);
  DVec3 bitangent = blend3(b0, b1, b2, se.mesh.bitangents[idx[0]], se.mesh.bitangents[idx[1]],
                           se.mesh.bitangents[idx[2]]);

  UvSampleWeights w = uv_sample_weights(lift.medium_diffuse.res, uv.x, uv.y);
  DVec3 detail = sample_map3(lift.fine_normal, w);
  sp.shading_normal = apply_normal_map(tangent, bitangent, sp.geo_normal, detail);

  DVec3 diff_stat = blend3(b0, b1, b2, se.albedos.diffuse[idx[0]], se.albedos.diffuse[idx[1]],
                           se.albedos.diffuse[idx[2]]);
  DVec3 spec_stat = blend3(b0, b1, b2, se.albedos.specular[idx[0]], se.albedos.specular[idx[1]],
                           se.albedos.specular[idx[2]]);
  sp.diffuse = clamp01v(diff_stat + sample_map3(lift.medium_diffuse, w) +
                        sample_map3(lift.fine_diffuse, w));
  sp.specular = clamp01v(spec_stat + sample_map3(lift.medium_specular, w));
  sp.s_intensity = specular_intensity(sp.specular);

  sp.view = normalized(se.camera.t - sp.position);
  sp.reflection = reflect(sp.shading_normal, sp.view);
  return sp;
}

}  // namespace

SurfacePointD eval_surface_point(const SceneEval& se, int tri, double b1, double b2) {
  const int* idx = &se.bundle->triangles[3 * tri];
  double b0 = 1.0 - b1 - b2;
  Vec2 uv0 = se.bundle->vertex_uv(idx[0]), uv1 = se.bundle->vertex_uv(idx[1]),
       uv2 = se.bundle->vertex_uv(idx[2]);
  Vec2 uv{b0 * uv0.x + b1 * uv1.x + b2 * uv2.x, b0 * uv0.y + b1 * uv1.y + b2 * uv2.y};
  return eval_surface_impl(se, idx, b0, b1, b2, uv);
}

SurfacePointD eval_surface_vertex(const SceneEval& se, int vertex) {
  const int idx[3] = {vertex, vertex, vertex};
  return eval_surface_impl(se, idx, 1.0, 0.0, 0.0, se.bundle->vertex_uv(vertex));
}

DVec3 shade_surface(const SceneEval& se, const SurfacePointD& sp) {
  ShadePoint p;
  p.normal = sp.shading_normal;
  p.diffuse = sp.diffuse;
  p.specular = sp.specular;
  p.view = sp.view;
  return shade(se.conv_light, p);
}

HitFrame hit_frame_values(const SceneEval& se, int tri, double b1, double b2) {
  Tape::Pause pause;
  SurfacePointD sp = eval_surface_point(se, tri, b1, b2);
  return {value(sp.position), value(sp.geo_normal), value(sp.shading_normal),
          value(sp.reflection)};
}

}  // namespace facefit
