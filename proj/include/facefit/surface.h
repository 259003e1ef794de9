#pragma once

#include "facefit/bundle.h"
#include "facefit/scene.h"
#include "facefit/sh.h"
#include "facefit/shading.h"

namespace facefit {

// One loss evaluation's differentiable scene state, built once per iteration
// from the lifted parameters.  Values are identical whether or not a tape is
// recording (the lift decides).
struct SceneEval {
  const ModelBundle* bundle = nullptr;
  const SceneLift* lift = nullptr;
  MeshD mesh;
  MeshValues values;
  AlbedosD albedos;
  CameraD camera;
  Camera camera_v;
  ConvolvedKernels kernels;
  ConvolvedLight conv_light;
  EnvMapD env;
};

SceneEval make_scene_eval(const ModelBundle& bundle, const SceneLift& lift,
                          const CameraIntrinsics& k);

// Composed differentiable surface state at one point.  The albedo increments
// and the detail normal always apply; untouched maps are identity, so every
// stage runs the same pipeline.
struct SurfacePointD {
  DVec3 position;
  DVec3 geo_normal;      // interpolated vertex normal, unit
  DVec3 shading_normal;  // detail map applied, unit
  DVec3 view;            // unit, point -> camera center
  DVec3 reflection;      // view mirrored about shading_normal
  DVec3 diffuse, specular;  // composed texels, clamped to [0,1]
  DiffValue s_intensity;    // mean of the specular texel
  Vec2 uv;                  // constant map coordinate
};

// Barycentric surface point on a triangle (weights are detached constants).
SurfacePointD eval_surface_point(const SceneEval& se, int tri, double b1, double b2);
// The same composition at a mesh vertex (for the vertex-based loss).
SurfacePointD eval_surface_vertex(const SceneEval& se, int vertex);

// Analytic irradiance at an evaluated point.
DVec3 shade_surface(const SceneEval& se, const SurfacePointD& sp);

// Plain-value shading frame at a hit, for planning MC samples.
struct HitFrame {
  Vec3 point, geo_normal, shading_normal, reflection;
};
HitFrame hit_frame_values(const SceneEval& se, int tri, double b1, double b2);

}  // namespace facefit
