#include "facefit/shading.h"

#include <stdexcept>

namespace facefit {

ConvolvedKernels make_kernels(double roughness) {
  ConvolvedKernels k;
  k.half_cosine = half_cosine_coeffs();
  k.lobe = brdf_kernel_coeffs(roughness);
  k.roughness = roughness;
  k.exponent = lobe_exponent(roughness);
  return k;
}

ConvolvedLight convolve_light(const std::array<std::vector<DiffValue>, 3>& coeffs, const ConvolvedKernels& kernels) {
  ConvolvedLight out;
  for (int c = 0; c < 3; ++c) {
    if (coeffs[c].size() != kShCoeffs) throw std::runtime_error("shading: light needs 81 coefficients per channel");
    out.diffuse[c].resize(kShCoeffs);
    out.specular[c].resize(kShCoeffs);
    for (int l = 0; l < kShBands; ++l)
      for (int m = -l; m <= l; ++m) {
        int i = l * (l + 1) + m;
        out.diffuse[c][i] = coeffs[c][i] * kernels.half_cosine[l];
        out.specular[c][i] = coeffs[c][i] * kernels.lobe[l];
      }
  }
  return out;
}

DVec3 shade_diffuse(const ConvolvedLight& light, const DVec3& n, const DVec3& albedo) {
  DiffValue y[kShCoeffs];
  sh_basis(n, y);
  std::span<const DiffValue> ys(y, kShCoeffs);
  return {albedo.x * fdot(light.diffuse[0], ys), albedo.y * fdot(light.diffuse[1], ys),
          albedo.z * fdot(light.diffuse[2], ys)};
}

DVec3 shade_specular(const ConvolvedLight& light, const DVec3& refl) {
  DiffValue y[kShCoeffs];
  sh_basis(refl, y);
  std::span<const DiffValue> ys(y, kShCoeffs);
  return {fdot(light.specular[0], ys), fdot(light.specular[1], ys), fdot(light.specular[2], ys)};
}

DVec3 reflect(const DVec3& n, const DVec3& w) {
  DiffValue d = dot(n, w);
  return n * (2.0 * d) - w;
}

DiffValue specular_intensity(const DVec3& s) { return (s.x + s.y + s.z) * (1.0 / 3.0); }

DVec3 shade(const ConvolvedLight& light, const ShadePoint& p) {
  DVec3 bd = shade_diffuse(light, p.normal, p.diffuse);
  DVec3 bs = shade_specular(light, reflect(p.normal, p.view));
  DiffValue s = specular_intensity(p.specular);
  DiffValue one_minus = 1.0 - s;
  DVec3 b = {one_minus * bd.x + s * bs.x, one_minus * bd.y + s * bs.y, one_minus * bd.z + s * bs.z};
  return {max(b.x, DiffValue(0.0)), max(b.y, DiffValue(0.0)), max(b.z, DiffValue(0.0))};
}

DVec3 apply_normal_map(const DVec3& t, const DVec3& b, const DVec3& n, const DVec3& map_vector) {
  DVec3 m = normalized(map_vector);
  DVec3 world = t * m.x + b * m.y + n * m.z;
  return normalized(world);
}

}  // namespace facefit
