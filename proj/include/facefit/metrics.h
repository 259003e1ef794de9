#pragma once

#include <string>
#include <vector>

#include "facefit/image.h"
#include "facefit/vec.h"

namespace facefit {

struct MetricReport {
  double mean = 0.0, stddev = 0.0;
  double pct20 = 0.0, pct25 = 0.0, pct30 = 0.0;  // angular metric only
  std::size_t count = 0;
};

// Euclidean distances under identity correspondence, model units.
MetricReport vertex_position_error(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt);

// Per-pixel arccos of the normal dot inside the mask, in degrees, plus the
// fraction strictly below 20/25/30 degrees.  Non-unit inputs are
// renormalized (warned once per call on stderr).
MetricReport normal_angular_error(const Image& pred, const Image& gt, const Image& mask);

// Structural similarity on the luminance channel, 8x8 sliding window,
// C1=(0.01)^2, C2=(0.03)^2.  Inputs are expected tone-mapped to [0,1].
double ssim(const Image& a, const Image& b);

std::string metric_json(const MetricReport& r);

}  // namespace facefit
