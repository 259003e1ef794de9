#pragma once

#include <array>
#include <string>
#include <vector>

#include "facefit/config.h"
#include "facefit/losses.h"
#include "facefit/ray_renderer.h"

namespace facefit {

struct AdamState {
  std::vector<double> m, v;
  int t = 0;
};

// Standard bias-corrected update; grads and params must have equal length.
void adam_step(AdamState& st, std::span<double> params, std::span<const double> grad, double lr,
               double beta1, double beta2, double eps);

// Landmark-aligned pose plus a gray DC light matched to the image's mean
// brightness; every other parameter starts at zero.
SceneParams initialize_params(const ModelBundle& bundle, const Image& target,
                              const std::vector<Vec2>& landmarks, const FitConfig& cfg);

struct StageTrace {
  Stage stage = Stage::kCoarse;
  std::vector<double> total;  // loss value per iteration
};

struct FitResult {
  SceneParams params;
  std::array<Image, 3> stage_renders;  // radiance after each stage
  std::array<Image, 3> stage_normals;
  std::array<Image, 3> stage_masks;
  std::array<StageTrace, 3> traces;
};

// Coarse -> medium -> fine optimization from the given initialization.
// Writes params, maps, env map, per-stage renders and fit_log.csv into
// out_dir when it is non-empty.
FitResult fit(const ModelBundle& bundle, const Image& target, const std::vector<Vec2>& landmarks,
              const SceneParams& initial, const FitConfig& cfg, const std::string& out_dir = "");

struct AblationArm {
  double w_dr = 0.0;
  std::vector<double> errors;  // per-seed mean vertex position error
  double mean = 0.0, stddev = 0.0;
};

struct AblationReport {
  AblationArm hybrid, ray_only;
  std::vector<std::uint64_t> seeds;
  double landmark_noise_px = 1.5;
};

// Coarse-only fits from landmark-noise-perturbed inits, with and without the
// vertex-renderer term, scored by mean vertex position error against the
// known mesh.  Same noise and seeds in both arms.
AblationReport ablation_hybrid(const ModelBundle& bundle, const Image& target,
                               const std::vector<Vec2>& landmarks,
                               const std::vector<Vec3>& gt_vertices, const FitConfig& cfg,
                               int num_seeds);
std::string ablation_json(const AblationReport& r);

}  // namespace facefit
