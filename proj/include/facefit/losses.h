#pragma once

#include <map>
#include <string>
#include <vector>

#include "facefit/bundle.h"
#include "facefit/raster.h"
#include "facefit/ray_renderer.h"
#include "facefit/surface.h"

namespace facefit {

struct LossWeights {
  double w_lm = 0.1;   // landmark term
  double w_dr = 0.5;   // vertex-renderer term
  // Medium stage.
  double med_w_s = 20.0;
  double med_w_c_diff = 0.2;  // halves per round
  double med_w_c_spec = 0.01;
  double med_w_m = 1e-4;
  double med_w_b = 1.0;
  // Fine stage.
  double fine_w_s = 10.0;
  double fine_w_c = 1.0;  // halves per round
  double fine_w_m = 1e-4;
  double fine_w_b = 1.0;
  double halving_factor = 2.0;
  int round_iters = 50;  // iterations per relaxation round
};

// Consistency weights relax by the halving factor each round; everything
// else is constant.
LossWeights schedule_weights(const LossWeights& base, int round);

DiffValue prior_loss(const std::vector<DiffValue>& alpha, const std::vector<DiffValue>& beta,
                     const ModelBundle& bundle);
DiffValue softbox_loss(const std::vector<DiffValue>& xs);
DiffValue softbox_loss_map(const UvMapD& map);

// Mean over texels and channels of |map(t) - map(u_flip(t))|.
DiffValue symmetry_loss(const UvMapD& map);
// Mean over texels of the per-texel L1 (channels summed).
DiffValue consistency_loss(const UvMapD& refined, const UvMapD& base);
// Mean over texels of || t - mean(4-neighborhood) ||^2, edge neighborhoods clamped.
DiffValue smoothness_loss(const UvMapD& map);
// Same with mesh first-ring adjacency over a per-vertex field.
DiffValue smoothness_loss_mesh(const std::vector<DVec3>& field, const ModelBundle& bundle);

// Statistical per-vertex albedos baked into uv space through the atlas
// (differentiable in beta); zero outside the atlas.
UvMapD bake_albedo_map(const SceneEval& se, bool specular);
UvMapD compose_map(const UvMapD& base, const UvMapD* inc1, const UvMapD* inc2);
UvMapD detach_map(const UvMapD& map);

// Frozen per-iteration sampling decisions: the MC plan plus the vertex
// visibility mask, with a fingerprint of all discrete choices.
struct SampledPlans {
  RayPlan ray;
  std::vector<std::uint8_t> vertex_visible;
  std::uint64_t fingerprint = 0;
};
SampledPlans build_plans(const SceneEval& se, int spp, std::uint64_t seed);

struct LossBreakdown {
  DiffValue total;
  std::map<std::string, double> terms;  // values only, for logs
};

// The composite stage objectives.  The data term (ray + vertex + landmarks)
// is shared; the prior/box apply to coefficients in the coarse stage and the
// regularizer set applies to the stage's maps afterwards.
LossBreakdown stage_loss(Stage stage, const SceneEval& se, const SampledPlans& plans,
                         const Image& target, const std::vector<Vec2>* landmarks,
                         const LossWeights& w);

}  // namespace facefit
