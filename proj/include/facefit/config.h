#pragma once

#include <cstdint>
#include <string>

#include "facefit/losses.h"
#include "facefit/scene.h"

namespace facefit {

struct FitConfig {
  LossWeights weights;
  int coarse_iters = 120;
  int medium_iters = 100;
  int fine_iters = 100;
  double lr_coeffs = 0.05;
  double lr_maps = 0.01;
  double co_refine_scale = 0.1;  // medium stage keeps refining coarse blocks at this lr fraction
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  int spp = 8;            // per-iteration estimator samples
  int artifact_spp = 256; // stage renders and fixture targets
  std::uint64_t seed = 1;
  double roughness = 0.35;
  double focal = 460.0;
  bool deterministic = true;  // accepted for interface parity; execution is always serial
};

FitConfig default_config();

// Canonical JSON round-trip; unknown keys rejected so configs stay honest.
std::string config_json(const FitConfig& cfg);
FitConfig parse_config(const std::string& json_text);
FitConfig load_config(const std::string& path);
void save_config(const std::string& path, const FitConfig& cfg);

// FNV-1a of the canonical serialization.
std::uint64_t config_hash(const FitConfig& cfg);

}  // namespace facefit
