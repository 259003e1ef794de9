#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "facefit/bvh.h"
#include "facefit/image.h"
#include "facefit/surface.h"

namespace facefit {

struct PixelHit {
  int tri = -1;
  double b1 = 0.0, b2 = 0.0;
  double t = 0.0;
  bool covered() const { return tri >= 0; }
};

// One planned MC direction: the direction, the cosine against its sampling
// axis at plan time (the pdf anchor the estimator divides by), and the shadow
// verdict.  All detached.
struct LobeSample {
  Vec3 dir;
  double cos_ref = 0.0;
  std::uint8_t visible = 0;
};

struct PixelPlan {
  PixelHit hit;
  std::vector<LobeSample> diffuse, specular;
};

// Frozen sampling decisions for a whole frame.  The differentiable estimator
// replays the plan, so gradients only flow through the smooth factors; the
// fingerprint hashes the discrete structure (hit ids, visibility) so callers
// can tell when a perturbation crossed a silhouette or shadow edge.
struct RayPlan {
  int width = 0, height = 0, spp = 0;
  std::uint64_t seed = 0;
  std::vector<PixelPlan> pixels;  // row-major
  std::uint64_t fingerprint = 0;
};

Vec3 pixel_ray_dir(const Camera& cam, double px, double py);

PixelHit trace_primary(const Bvh& bvh, const Camera& cam, int x, int y);

using HitFrameFn = std::function<HitFrame(const PixelHit&)>;

// Samples both lobes at an already-traced hit: spp cosine directions about
// the shading normal and spp lobe directions about the reflection, each with
// a shadow query from the geometric-normal-offset origin.  With shadow_test
// false every sample is marked visible, turning the estimator into an
// unbiased sample of the analytic convolution shading (used for
// inverse-crime reference targets, where occlusion would put structure into
// the image that the analytic terms cannot express).
void plan_pixel_samples(PixelPlan& plan, const HitFrame& frame, const Bvh& bvh,
                        double scene_scale, double lobe_exponent, int spp, std::uint64_t seed,
                        std::uint64_t pixel_index, bool shadow_test = true);

RayPlan build_ray_plan(const Bvh& bvh, const Camera& cam, const HitFrameFn& frame_at,
                       double scene_scale, double lobe_exponent, int spp, std::uint64_t seed,
                       bool shadow_test = true);

// Replays a pixel's plan against differentiable surface state:
//   (1-s) * mean_k[ c * L(w_k) * V_k * cos_k / cos_ref ]
//   +  s  * mean_k[ L(w_k) * V_k * (cos_k / cos_ref)^p ]
// The ratios are exactly 1 where the plan was built, so values match a plain
// trace bit for bit and gradients flow through the smooth factors only.
DVec3 mc_radiance(const PixelPlan& plan, const SurfacePointD& sp, const EnvMapD& env,
                  double lobe_exponent);

// L1 sum over the whole frame, per channel: covered pixels compare traced
// radiance against the target, missed pixels compare zero against the target
// (a constant contribution; the vertex term owns silhouette gradients).
DiffValue ray_photo_loss(const RayPlan& plan, const std::vector<int>& covered,
                         const std::vector<DVec3>& radiance, const Image& target);

struct RenderOutput {
  Image image;   // 3ch linear radiance
  Image normal;  // 3ch world-space shading normal, zeros at misses
  Image mask;    // 1ch coverage
  std::vector<PixelHit> hits;
};

// Plain full-frame render of the composed scene (no tape): shares every code
// path with the loss-side estimator, so a loss against its own output with
// the same seed is exactly zero.
RenderOutput trace(const ModelBundle& bundle, const SceneParams& params,
                   const CameraIntrinsics& intr, int spp, std::uint64_t seed,
                   bool shadow_test = true);

}  // namespace facefit
