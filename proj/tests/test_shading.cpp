#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "facefit/rng.h"
#include "facefit/shading.h"

using namespace facefit;

namespace {

constexpr double kPi = std::numbers::pi;

DVec3 cvec(double x, double y, double z) { return {DiffValue(x), DiffValue(y), DiffValue(z)}; }

std::array<std::vector<DiffValue>, 3> lift_coeffs(const SHLight& light) {
  std::array<std::vector<DiffValue>, 3> out;
  for (int ch = 0; ch < 3; ++ch) out[ch].assign(light.coeffs[ch].begin(), light.coeffs[ch].end());
  return out;
}

Vec3 random_unit(Rng& rng) {
  while (true) {
    Vec3 v{rng.next_double() * 2 - 1, rng.next_double() * 2 - 1, rng.next_double() * 2 - 1};
    double n = norm(v);
    if (n > 1e-3 && n < 1.0) return v * (1.0 / n);
  }
}

SHLight unit_constant_light() {
  SHLight light;
  for (auto& ch : light.coeffs) ch[0] = 2.0 * std::sqrt(kPi);  // radiance exactly 1 everywhere
  return light;
}

}  // namespace

TEST_SUITE("shading") {

TEST_CASE("white furnace: unit albedo under unit light shades to one") {
  ConvolvedKernels kernels = make_kernels(0.35);
  ConvolvedLight light = convolve_light(lift_coeffs(unit_constant_light()), kernels);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Vec3 n = random_unit(rng);
    DVec3 d = shade_diffuse(light, lift_const(n), cvec(1, 1, 1));
    CHECK(d.x.v == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.y.v == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.z.v == doctest::Approx(1.0).epsilon(1e-9));
    // The reflection lobe is normalized, so the blend stays at one for any s.
    ShadePoint p{lift_const(n), cvec(1, 1, 1), cvec(0.7, 0.7, 0.7), lift_const(n)};
    DVec3 full = shade(light, p);
    CHECK(full.x.v == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(full.z.v == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("diffuse shading matches hemisphere quadrature of a band-limited light") {
  // Oracle: B_d = albedo * int_{hemisphere} L(w) max(cos, 0)/pi dw evaluated
  // with a dense Riemann grid around the shading normal's frame.
  Rng rng(17);
  SHLight sh;
  for (auto& ch : sh.coeffs)
    for (double& c : ch) c = rng.next_double() * 0.6 - 0.3;
  for (auto& ch : sh.coeffs) ch[0] += 2.0;  // keep radiance positive-ish
  ConvolvedKernels kernels = make_kernels(0.35);
  ConvolvedLight conv = convolve_light(lift_coeffs(sh), kernels);

  for (int trial = 0; trial < 3; ++trial) {
    Vec3 n = random_unit(rng);
    Vec3 up = std::fabs(n.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    Vec3 t = normalized(cross(up, n)), b = cross(n, t);
    const int nu = 400, nphi = 800;
    Vec3 acc{0, 0, 0};
    for (int i = 0; i < nu; ++i) {
      double u = (i + 0.5) / nu;  // cos(theta) over the upper hemisphere
      double s = std::sqrt(1.0 - u * u);
      for (int j = 0; j < nphi; ++j) {
        double phi = 2.0 * kPi * (j + 0.5) / nphi;
        Vec3 w = t * (s * std::cos(phi)) + b * (s * std::sin(phi)) + n * u;
        acc += sh_eval(sh, normalized(w)) * (u / kPi);
      }
    }
    Vec3 oracle = acc * (2.0 * kPi / (nu * nphi));
    DVec3 got = shade_diffuse(conv, lift_const(n), cvec(1, 1, 1));
    CHECK(got.x.v == doctest::Approx(oracle.x).scale(1.0).epsilon(1e-3));
    CHECK(got.y.v == doctest::Approx(oracle.y).scale(1.0).epsilon(1e-3));
    CHECK(got.z.v == doctest::Approx(oracle.z).scale(1.0).epsilon(1e-3));
  }
}

TEST_CASE("albedo scales the diffuse term linearly") {
  Rng rng(23);
  SHLight sh;
  sh.coeffs[0][0] = sh.coeffs[1][0] = sh.coeffs[2][0] = 3.0;
  sh.coeffs[0][3] = 0.8;
  ConvolvedLight conv = convolve_light(lift_coeffs(sh), make_kernels(0.35));
  Vec3 n = random_unit(rng);
  DVec3 a1 = shade_diffuse(conv, lift_const(n), cvec(1, 1, 1));
  DVec3 a2 = shade_diffuse(conv, lift_const(n), cvec(0.5, 0.25, 0.1));
  CHECK(a2.x.v == doctest::Approx(0.5 * a1.x.v).epsilon(1e-12));
  CHECK(a2.y.v == doctest::Approx(0.25 * a1.y.v).epsilon(1e-12));
  CHECK(a2.z.v == doctest::Approx(0.1 * a1.z.v).epsilon(1e-12));
}

TEST_CASE("specular lobe looks along the reflection direction") {
  // A tight lobe under a strongly directional light peaks when the
  // reflection direction aligns with the light axis.
  SHLight sh;
  Vec3 axis = normalized(Vec3{0.2, 0.3, 0.9});
  // Project a sharp positive lobe around `axis`.
  std::array<double, kShCoeffs> y;
  sh_basis(axis, y);
  for (int k = 0; k < kShCoeffs; ++k)
    for (int ch = 0; ch < 3; ++ch) sh.coeffs[ch][k] = y[k];
  ConvolvedLight conv = convolve_light(lift_coeffs(sh), make_kernels(0.2));
  DVec3 aligned = shade_specular(conv, lift_const(axis));
  Rng rng(29);
  for (int i = 0; i < 8; ++i) {
    Vec3 d = random_unit(rng);
    if (dot(d, axis) > 0.95) continue;
    DVec3 off = shade_specular(conv, lift_const(d));
    CHECK(aligned.x.v > off.x.v);
  }
}

TEST_CASE("blend weight follows the mean specular intensity") {
  SHLight light = unit_constant_light();
  light.coeffs[0][3] = 0.5;  // make diffuse != specular response
  ConvolvedLight conv = convolve_light(lift_coeffs(light), make_kernels(0.35));
  Vec3 n{0, 0, 1};
  DVec3 view = lift_const(normalized(Vec3{0.3, -0.2, 0.93}));
  DVec3 refl = reflect(lift_const(n), view);

  auto shade_s = [&](double s) {
    ShadePoint p{lift_const(n), cvec(0.9, 0.9, 0.9), cvec(s, s, s), view};
    return shade(conv, p).x.v;
  };
  DVec3 bd = shade_diffuse(conv, lift_const(n), cvec(0.9, 0.9, 0.9));
  DVec3 bs = shade_specular(conv, refl);
  double s = 0.37;
  CHECK(shade_s(s) == doctest::Approx((1 - s) * bd.x.v + s * bs.x.v).epsilon(1e-9));
  CHECK(specular_intensity(cvec(0.2, 0.5, 0.8)).v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("shading clamps negative irradiance to zero") {
  SHLight sh;
  sh.coeffs[0][2] = -2.0;  // radiance negative toward +z
  sh.coeffs[1][2] = -2.0;
  sh.coeffs[2][2] = -2.0;
  ConvolvedLight conv = convolve_light(lift_coeffs(sh), make_kernels(0.35));
  ShadePoint p{cvec(0, 0, 1), cvec(1, 1, 1), cvec(0, 0, 0), cvec(0, 0, 1)};
  DVec3 out = shade(conv, p);
  CHECK(out.x.v == 0.0);
  CHECK(out.y.v == 0.0);
  CHECK(out.z.v == 0.0);
}

TEST_CASE("reflect mirrors the view about the normal") {
  Rng rng(31);
  for (int i = 0; i < 10; ++i) {
    Vec3 n = random_unit(rng);
    Vec3 v = random_unit(rng);
    if (dot(n, v) < 0.05) continue;
    DVec3 r = reflect(lift_const(n), lift_const(v));
    Vec3 rv = value(r);
    CHECK(norm(rv) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dot(rv, n) == doctest::Approx(dot(v, n)).epsilon(1e-12));          // equal angles
    Vec3 sum = rv + v;                                                       // r + v lies along n
    CHECK(norm(cross(sum, n)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("normal map identity and perturbation") {
  Vec3 t{1, 0, 0}, b{0, 1, 0}, n{0, 0, 1};
  DVec3 id = apply_normal_map(lift_const(t), lift_const(b), lift_const(n), cvec(0, 0, 1));
  CHECK(value(id).z == doctest::Approx(1.0).epsilon(1e-12));
  // A tangent-space vector tips the world normal toward the tangent.
  DVec3 tipped = apply_normal_map(lift_const(t), lift_const(b), lift_const(n), cvec(0.5, 0.0, 1.0));
  Vec3 tv = value(tipped);
  CHECK(norm(tv) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tv.x > 0.3);
  CHECK(tv.y == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // Non-unit map vectors are renormalized first: scaling changes nothing.
  DVec3 scaled = apply_normal_map(lift_const(t), lift_const(b), lift_const(n), cvec(1.5, 0.0, 3.0));
  CHECK(value(scaled).x == doctest::Approx(tv.x).epsilon(1e-12));
}

TEST_CASE("kernels expose the configured roughness") {
  ConvolvedKernels k = make_kernels(0.35);
  CHECK(k.roughness == 0.35);
  CHECK(k.exponent == doctest::Approx(2.0 / (0.35 * 0.35) - 2.0));
  CHECK(k.half_cosine[0] == 1.0);
  CHECK(k.lobe[0] == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
