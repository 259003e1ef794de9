#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facefit/bundle.h"
#include "facefit/image.h"
#include "facefit/scene.h"

namespace facefit {

// Synthetic scenes with known parameters, used to exercise the full pipeline
// without external data.  Kinds:
//   face          smooth face-like relief with morph bases, albedo blotches
//                 and a wrinkled detail normal map
//   face-blocker  same face plus a side slab that casts self-shadows
//   face-shading  face lit from one side whose target bakes the shading
//                 pattern into the diffuse increments
//   sphere-furnace  unit-albedo sphere under constant unit radiance
//   sphere-bridge   gray glossy sphere under a gentle one-lobe gradient light
struct Fixture {
  std::string kind;
  ModelBundle bundle;
  SceneParams gt;
  CameraIntrinsics intr;
  Image target;     // linear radiance at the requested sample count
  Image gt_normal;  // world-space shading normals of the reference render
  Image gt_mask;
  std::vector<Vec2> landmarks;  // exact projections of the landmark vertices
  UvMap shading_pattern;        // face-shading only: 1ch zero-mean texel field
  std::uint64_t seed = 0;
  int spp = 0;
};

Fixture make_fixture(const std::string& kind, std::uint64_t seed, int spp);

void save_fixture(const std::string& dir, const Fixture& f);
Fixture load_fixture(const std::string& dir);

ModelBundle make_face_bundle(std::uint64_t seed, bool with_blocker);
ModelBundle make_sphere_bundle(double radius, double diffuse_albedo, double specular_albedo);

// Seeded noise on every trainable block (the detail normal map is
// renormalized afterwards); for gradient checks and offset starts.
SceneParams perturb_params(const ModelBundle& bundle, const SceneParams& base, std::uint64_t seed,
                           double scale);

}  // namespace facefit
