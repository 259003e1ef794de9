#pragma once

#include <array>

#include "facefit/diff.h"
#include "facefit/scene.h"
#include "facefit/sh.h"

namespace facefit {

struct ConvolvedKernels {
  std::array<double, kShBands> half_cosine;
  std::array<double, kShBands> lobe;
  double roughness = 0.35;
  double exponent = 1.0;
};
ConvolvedKernels make_kernels(double roughness);

// Light coefficients pre-multiplied by the per-band kernel weights, expanded
// to all 81 entries so shading is a single dot with the basis per channel.
struct ConvolvedLight {
  std::array<std::vector<DiffValue>, 3> diffuse;   // A_l * B_lm
  std::array<std::vector<DiffValue>, 3> specular;  // S_l * B_lm
};
ConvolvedLight convolve_light(const std::array<std::vector<DiffValue>, 3>& coeffs, const ConvolvedKernels& kernels);

// Irradiance pieces.  `n` and `refl` must be unit (value-checked by sh_basis).
DVec3 shade_diffuse(const ConvolvedLight& light, const DVec3& n, const DVec3& albedo);
DVec3 shade_specular(const ConvolvedLight& light, const DVec3& refl);

// Full surface response at a point: (1 - s) * B_d + s * B_s, clamped >= 0,
// with s the mean of the specular texel and refl the view vector mirrored
// about the shading normal.
struct ShadePoint {
  DVec3 normal;      // unit shading normal (detail-mapped in the fine stage)
  DVec3 diffuse;     // diffuse texel, clamped to [0,1] by the caller
  DVec3 specular;    // specular texel, clamped to [0,1] by the caller
  DVec3 view;        // unit, surface point -> camera
};
DVec3 shade(const ConvolvedLight& light, const ShadePoint& p);

DVec3 reflect(const DVec3& n, const DVec3& view);  // 2(n.w)n - w, unit for unit inputs
DiffValue specular_intensity(const DVec3& specular_texel);

// Tangent-space detail normal into world space through the [t|b|n] frame;
// the map vector is renormalized first, the result after the frame (the
// interpolated frame is only approximately orthonormal).
DVec3 apply_normal_map(const DVec3& t, const DVec3& b, const DVec3& n, const DVec3& map_vector);

}  // namespace facefit
