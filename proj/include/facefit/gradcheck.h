#pragma once

#include <string>
#include <vector>

#include "facefit/config.h"
#include "facefit/losses.h"

namespace facefit {

// One coordinate compared between reverse-mode and central differences.
struct GradCheckEntry {
  std::string block;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  bool flagged = false;  // perturbation crossed a sampling or branch boundary
  bool pass = false;
};

struct GradCheckReport {
  Stage stage = Stage::kCoarse;
  std::vector<GradCheckEntry> entries;
  int checked = 0;   // entries that were comparable (not flagged)
  int passed = 0;    // comparable entries within tolerance
  int flagged = 0;   // skipped: the step crossed a non-smooth boundary
  double max_rel_err = 0.0;  // over comparable entries
  bool pass = false;         // every comparable entry within tolerance
};

// Central-difference check of the stage loss gradient.  The estimator's
// sample directions, visibility bits and rasterized coverage are built once
// and reused on both sides of every step, so the compared function is the
// smooth one the tape actually differentiates.  Steps that land on a branch
// or coverage change are flagged and excluded instead of failing the run.
GradCheckReport gradcheck_stage(const ModelBundle& bundle, const SceneParams& params,
                                const Image& target, const std::vector<Vec2>& landmarks,
                                Stage stage, const FitConfig& cfg, int num_coords,
                                std::uint64_t seed);

std::string gradcheck_json(const GradCheckReport& r);

inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckTol = 1e-4;

}  // namespace facefit
