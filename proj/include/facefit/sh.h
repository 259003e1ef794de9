#pragma once

#include <array>
#include <span>
#include <vector>

#include "facefit/diff.h"
#include "facefit/image.h"

namespace facefit {

inline constexpr int kShBands = 9;
inline constexpr int kShCoeffs = kShBands * kShBands;  // 81
inline constexpr int kEnvSize = 64;

// Real spherical harmonics up to band 8 without the Condon-Shortley phase,
// band-major (l,m) order: index = l*(l+1)+m.  Fully polynomial in (x,y,z), so
// it differentiates cleanly everywhere on the sphere (poles included).
// Rejects directions more than 1e-6 from unit length.
void sh_basis(const DVec3& dir, std::span<DiffValue> out);
void sh_basis(const Vec3& dir, std::span<double> out);

// Zonal convolution coefficients of clamp(cos)/pi (the cosine lobe with the
// albedo-side 1/pi absorbed): A = [1, 2/3, 1/4, 0, -1/24, 0, 1/64, 0, -1/128].
std::array<double, kShBands> half_cosine_coeffs();

// Zonal coefficients of the normalized reflection lobe (p+1)/(2pi)*t^p with
// p = 2/roughness^2 - 2 clamped to >= 1.  S_0 == 1 for every roughness.
std::array<double, kShBands> brdf_kernel_coeffs(double roughness);
double lobe_exponent(double roughness);

struct SHLight {
  // coeffs[channel][l*(l+1)+m]
  std::array<std::array<double, kShCoeffs>, 3> coeffs{};
};

// Evaluate a light's radiance toward `dir` (no clamp).
Vec3 sh_eval(const SHLight& light, const Vec3& dir);

// Equal-angle lat-long env map; row r, col c cover theta in
// [pi*r/size, pi*(r+1)/size) and phi in [2pi*c/size, 2pi*(c+1)/size).
// Directions are z-up: (sin t cos p, sin t sin p, cos t).
struct EnvMap {
  int size = kEnvSize;
  Image radiance;                  // size x size, 3ch, clamped >= 0
  std::vector<double> solid_angle; // per row (constant along a row)

  Vec3 texel_dir(int row, int col) const;
};

EnvMap bake_envmap(const SHLight& light, bool clamp_negative = true);

// Differentiable bake of the same map from lifted coefficients.
struct EnvMapD {
  int size = kEnvSize;
  std::vector<DiffValue> radiance;  // size*size*3

  const DiffValue& at(int col, int row, int c) const { return radiance[(std::size_t(row) * size + col) * 3 + c]; }
};
EnvMapD bake_envmap(const std::array<std::vector<DiffValue>, 3>& coeffs);

// Bilinear lookup toward a (unit) direction; wraps in phi, clamps in theta.
DVec3 sample_envmap(const EnvMapD& env, const Vec3& dir);
Vec3 sample_envmap(const EnvMap& env, const Vec3& dir);

// Basis matrix at texel centers (size*size rows of 81), shared by both bakes.
const std::vector<double>& envmap_basis();

}  // namespace facefit
