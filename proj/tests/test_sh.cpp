#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "facefit/rng.h"
#include "facefit/scene.h"
#include "facefit/sh.h"

using namespace facefit;

namespace {

constexpr double kPi = std::numbers::pi;

// Gauss-Legendre nodes/weights on [a, b] by Newton iteration on P_n.
struct Quad {
  std::vector<double> x, w;
};
Quad gauss_legendre(int n, double a, double b) {
  Quad q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));  // Chebyshev initial guess
    for (int it = 0; it < 100; ++it) {
      double p = std::legendre(n, t);
      double dp = n * (t * p - std::legendre(n - 1, t)) / (t * t - 1.0);
      double dt = p / dp;
      t -= dt;
      if (std::fabs(dt) < 1e-15) break;
    }
    double p1 = std::legendre(n - 1, t);
    double dp = n * (t * std::legendre(n, t) - p1) / (t * t - 1.0);
    q.x[i] = a + (b - a) * 0.5 * (t + 1.0);
    q.w[i] = (b - a) / ((1.0 - t * t) * dp * dp);
  }
  return q;
}

Vec3 sphere_dir(double cos_theta, double phi) {
  double s = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  return {s * std::cos(phi), s * std::sin(phi), cos_theta};
}

// Exact quadrature over the sphere for integrands band-limited below the
// grid's degree: Gauss-Legendre in cos(theta) x trapezoid in phi.
template <class F>
double sphere_integral(const F& f, int nu = 24, int nphi = 64) {
  Quad qu = gauss_legendre(nu, -1.0, 1.0);
  double total = 0.0;
  for (int i = 0; i < nu; ++i) {
    double ring = 0.0;
    for (int j = 0; j < nphi; ++j) ring += f(sphere_dir(qu.x[i], 2.0 * kPi * (j + 0.5) / nphi));
    total += qu.w[i] * ring * (2.0 * kPi / nphi);
  }
  return total;
}

std::array<double, kShCoeffs> basis_at(const Vec3& dir) {
  std::array<double, kShCoeffs> y;
  sh_basis(dir, y);
  return y;
}

SHLight random_light(std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  SHLight light;
  for (auto& ch : light.coeffs)
    for (double& c : ch) c = scale * (rng.next_double() * 2.0 - 1.0);
  return light;
}

Vec3 random_unit(Rng& rng) {
  while (true) {
    Vec3 v{rng.next_double() * 2 - 1, rng.next_double() * 2 - 1, rng.next_double() * 2 - 1};
    double n = norm(v);
    if (n > 1e-3 && n < 1.0) return v * (1.0 / n);
  }
}

}  // namespace

TEST_SUITE("sh") {

TEST_CASE("band zero is the constant 1/(2 sqrt(pi))") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    auto y = basis_at(random_unit(rng));
    CHECK(y[0] == doctest::Approx(0.28209479177387814).epsilon(1e-14));
  }
}

TEST_CASE("pole direction keeps only zonal terms") {
  auto y = basis_at({0, 0, 1});
  for (int l = 0; l < kShBands; ++l) {
    for (int m = -l; m <= l; ++m) {
      double v = y[l * (l + 1) + m];
      if (m == 0)
        CHECK(v == doctest::Approx(std::sqrt((2.0 * l + 1.0) / (4.0 * kPi))).epsilon(1e-12));
      else
        CHECK(std::fabs(v) < 1e-12);
    }
  }
}

TEST_CASE("band one has positive axis alignment") {
  // No Condon-Shortley sign: each band-1 function is +sqrt(3/4pi) along its axis.
  double k = std::sqrt(3.0 / (4.0 * kPi));
  CHECK(basis_at({0, 1, 0})[1] == doctest::Approx(k).epsilon(1e-12));   // (1,-1) ~ y
  CHECK(basis_at({0, 0, 1})[2] == doctest::Approx(k).epsilon(1e-12));   // (1, 0) ~ z
  CHECK(basis_at({1, 0, 0})[3] == doctest::Approx(k).epsilon(1e-12));   // (1, 1) ~ x
}

TEST_CASE("basis is orthonormal under exact sphere quadrature") {
  // Accumulate the Gram matrix over a grid that integrates band <= 8
  // products exactly; quadrature error is pure roundoff.
  Quad qu = gauss_legendre(24, -1.0, 1.0);
  const int nphi = 64;
  std::vector<double> gram(kShCoeffs * kShCoeffs, 0.0);
  for (int i = 0; i < 24; ++i) {
    for (int j = 0; j < nphi; ++j) {
      auto y = basis_at(sphere_dir(qu.x[i], 2.0 * kPi * (j + 0.5) / nphi));
      double w = qu.w[i] * 2.0 * kPi / nphi;
      for (int r = 0; r < kShCoeffs; ++r)
        for (int c = r; c < kShCoeffs; ++c) gram[r * kShCoeffs + c] += w * y[r] * y[c];
    }
  }
  double worst = 0.0;
  for (int r = 0; r < kShCoeffs; ++r)
    for (int c = r; c < kShCoeffs; ++c)
      worst = std::max(worst, std::fabs(gram[r * kShCoeffs + c] - (r == c ? 1.0 : 0.0)));
  CHECK(worst < 1e-8);
}

TEST_CASE("differentiable basis matches the plain basis and finite differences") {
  Rng rng(11);
  Vec3 d = random_unit(rng);
  Tape tape;
  Tape::Scope scope(tape);
  DVec3 dd{DiffValue(d.x, tape.leaf()), DiffValue(d.y, tape.leaf()), DiffValue(d.z, tape.leaf())};
  std::vector<DiffValue> y(kShCoeffs);
  sh_basis(dd, y);
  auto yv = basis_at(d);
  for (int i = 0; i < kShCoeffs; ++i) CHECK(y[i].v == yv[i]);

  // Ambient-space central differences with a step inside the unit-length
  // tolerance of the basis evaluator.
  const double h = 4e-7;
  int picks[] = {2, 7, 19, 40, 77};
  for (int idx : picks) {
    std::vector<double> adj = tape.backward(y[idx].id);
    double g[3] = {dd.x.id != kNoNode ? adj[dd.x.id] : 0.0, adj[dd.y.id], adj[dd.z.id]};
    Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int a = 0; a < 3; ++a) {
      double n = (basis_at(d + axes[a] * h)[idx] - basis_at(d - axes[a] * h)[idx]) / (2 * h);
      CHECK(g[a] == doctest::Approx(n).epsilon(2e-3));
    }
  }
}

TEST_CASE("basis rejects non-unit directions") {
  std::array<double, kShCoeffs> y;
  CHECK_THROWS((void)sh_basis(Vec3{0.5, 0.5, 0.5}, y));
  CHECK_THROWS((void)sh_basis(Vec3{0, 0, 1.001}, y));
}

TEST_CASE("half-cosine weights match the published closed forms") {
  auto a = half_cosine_coeffs();
  double expect[kShBands] = {1.0, 2.0 / 3.0, 0.25, 0.0, -1.0 / 24.0, 0.0, 1.0 / 64.0, 0.0, -1.0 / 128.0};
  for (int l = 0; l < kShBands; ++l) CHECK(a[l] == doctest::Approx(expect[l]).epsilon(1e-12));
}

TEST_CASE("half-cosine weights match one-dimensional quadrature") {
  // Funk-Hecke: the band weight of clamp(cos)/pi is 2 * int_0^1 t P_l(t) dt,
  // integrated exactly by Gauss-Legendre.
  auto a = half_cosine_coeffs();
  Quad q = gauss_legendre(32, 0.0, 1.0);
  for (int l = 0; l < kShBands; ++l) {
    double quad = 0.0;
    for (std::size_t i = 0; i < q.x.size(); ++i) quad += q.w[i] * q.x[i] * std::legendre(l, q.x[i]);
    CHECK(std::fabs(a[l] - 2.0 * quad) < 1e-9);  // well inside the 1e-6 contract
  }
}

TEST_CASE("reflection lobe weights match quadrature and keep unit mass") {
  for (double r : {0.15, 0.35, 0.6, 1.0}) {
    double p = lobe_exponent(r);
    CHECK(p >= 1.0);
    auto s = brdf_kernel_coeffs(r);
    CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-12));
    Quad q = gauss_legendre(128, 0.0, 1.0);
    for (int l = 0; l < kShBands; ++l) {
      double quad = 0.0;
      for (std::size_t i = 0; i < q.x.size(); ++i)
        quad += q.w[i] * std::pow(q.x[i], p) * std::legendre(l, q.x[i]);
      CHECK(s[l] == doctest::Approx((p + 1.0) * quad).scale(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("rougher lobes attenuate high bands more") {
  auto tight = brdf_kernel_coeffs(0.2);
  auto wide = brdf_kernel_coeffs(0.6);
  for (int l = 1; l <= 4; ++l) CHECK(tight[l] > wide[l]);
  CHECK(lobe_exponent(0.35) == doctest::Approx(2.0 / (0.35 * 0.35) - 2.0).epsilon(1e-12));
  CHECK(lobe_exponent(1.0) == 1.0);  // exponent floor
  CHECK_THROWS((void)lobe_exponent(0.0));
  CHECK_THROWS((void)lobe_exponent(1.5));
}

TEST_CASE("light evaluation is the basis dot product") {
  SHLight light = random_light(21);
  Rng rng(22);
  for (int i = 0; i < 5; ++i) {
    Vec3 d = random_unit(rng);
    auto y = basis_at(d);
    Vec3 v = sh_eval(light, d);
    for (int ch = 0; ch < 3; ++ch) {
      double dotv = 0.0;
      for (int k = 0; k < kShCoeffs; ++k) dotv += light.coeffs[ch][k] * y[k];
      CHECK((ch == 0 ? v.x : ch == 1 ? v.y : v.z) == doctest::Approx(dotv).epsilon(1e-12));
    }
  }
}

TEST_CASE("environment map texels") {
  EnvMap env = bake_envmap(SHLight{});
  // Solid angles tile the sphere.
  double total = 0.0;
  for (int r = 0; r < env.size; ++r) total += env.solid_angle[r] * env.size;
  CHECK(total == doctest::Approx(4.0 * kPi).epsilon(1e-12));
  // Directions are unit and z-up: the top row looks toward +z.
  Vec3 d0 = env.texel_dir(0, 0);
  CHECK(norm(d0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d0.z > 0.99);
  CHECK(env.texel_dir(env.size - 1, 0).z < -0.99);
}

TEST_CASE("constant light bakes to a constant map") {
  SHLight light;
  double level = 0.7;
  for (auto& ch : light.coeffs) ch[0] = level * 2.0 * std::sqrt(kPi);
  EnvMap env = bake_envmap(light);
  for (int r = 0; r < env.size; r += 7)
    for (int c = 0; c < env.size; c += 7)
      for (int ch = 0; ch < 3; ++ch)
        CHECK(env.radiance.at(c, r, ch) == doctest::Approx(level).epsilon(1e-6));
}

TEST_CASE("negative lobes clamp to zero and clamping only adds energy") {
  SHLight light;
  light.coeffs[0][2] = 1.0;  // pure band-1 z lobe: negative on the lower hemisphere
  light.coeffs[1][2] = 1.0;
  light.coeffs[2][2] = 1.0;
  EnvMap clamped = bake_envmap(light, true);
  EnvMap raw = bake_envmap(light, false);
  bool any_zero = false, any_negative = false;
  double e_clamped = 0.0, e_raw = 0.0;
  for (int r = 0; r < clamped.size; ++r) {
    for (int c = 0; c < clamped.size; ++c) {
      CHECK(clamped.radiance.at(c, r, 0) >= 0.0f);
      any_zero |= clamped.radiance.at(c, r, 0) == 0.0f;
      any_negative |= raw.radiance.at(c, r, 0) < 0.0f;
      e_clamped += clamped.solid_angle[r] * clamped.radiance.at(c, r, 0);
      e_raw += raw.solid_angle[r] * raw.radiance.at(c, r, 0);
    }
  }
  CHECK(any_zero);
  CHECK(any_negative);
  CHECK(e_clamped > e_raw);  // max(0, x) >= x pointwise
  // The raw map integrates to the DC energy: zero here.
  CHECK(e_raw == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
}

TEST_CASE("unclamped bake re-projects onto the original coefficients") {
  SHLight light = random_light(31, 0.5);
  EnvMap env = bake_envmap(light, false);
  for (int ch = 0; ch < 3; ++ch) {
    for (int k : {0, 1, 4, 12, 30, 55, 80}) {
      double acc = 0.0;
      for (int r = 0; r < env.size; ++r)
        for (int c = 0; c < env.size; ++c)
          acc += env.solid_angle[r] * env.radiance.at(c, r, ch) * basis_at(env.texel_dir(r, c))[k];
      CHECK(acc == doctest::Approx(light.coeffs[ch][k]).scale(1.0).epsilon(0.02));
    }
  }
}

TEST_CASE("differentiable bake matches the plain bake") {
  SHLight light = random_light(41, 0.4);
  EnvMap env = bake_envmap(light, true);
  std::array<std::vector<DiffValue>, 3> coeffs;
  for (int ch = 0; ch < 3; ++ch)
    coeffs[ch].assign(light.coeffs[ch].begin(), light.coeffs[ch].end());
  EnvMapD envd = bake_envmap(coeffs);
  REQUIRE(envd.size == env.size);
  for (int r = 0; r < env.size; r += 5)
    for (int c = 0; c < env.size; c += 5)
      for (int ch = 0; ch < 3; ++ch)
        CHECK(envd.at(c, r, ch).v == doctest::Approx(double(env.radiance.at(c, r, ch))).epsilon(1e-6));
}

TEST_CASE("bilinear environment lookup") {
  SHLight light;
  for (auto& ch : light.coeffs) ch[0] = 2.0 * std::sqrt(kPi);
  EnvMap env = bake_envmap(light);
  Rng rng(51);
  for (int i = 0; i < 10; ++i) {
    Vec3 v = sample_envmap(env, random_unit(rng));
    CHECK(v.x == doctest::Approx(1.0).epsilon(1e-5));
  }
  // At a texel-center direction the lookup returns that texel.
  SHLight bumpy = random_light(52, 0.3);
  EnvMap env2 = bake_envmap(bumpy);
  Vec3 d = env2.texel_dir(10, 20);
  Vec3 v = sample_envmap(env2, d);
  CHECK(v.y == doctest::Approx(double(env2.radiance.at(20, 10, 1))).epsilon(1e-5));
}

TEST_CASE("rotating the light commutes with evaluation and diffuse convolution") {
  SHLight light = random_light(61, 0.6);
  DMat3 Rd = rotation_matrix(DVec3{DiffValue(0.4), DiffValue(-0.25), DiffValue(0.7)});
  Mat3 R{value(Rd.c0), value(Rd.c1), value(Rd.c2)};
  auto rot_t = [&](const Vec3& v) { return R.tmul(v); };

  // Project the rotated radiance field back onto the basis with an exact
  // band-limited quadrature; rotation must stay inside the 9-band space.
  SHLight rotated;
  Quad qu = gauss_legendre(24, -1.0, 1.0);
  const int nphi = 64;
  for (int i = 0; i < 24; ++i) {
    for (int j = 0; j < nphi; ++j) {
      Vec3 d = sphere_dir(qu.x[i], 2.0 * kPi * (j + 0.5) / nphi);
      double w = qu.w[i] * 2.0 * kPi / nphi;
      Vec3 L = sh_eval(light, rot_t(d));
      auto y = basis_at(d);
      for (int k = 0; k < kShCoeffs; ++k) {
        rotated.coeffs[0][k] += w * L.x * y[k];
        rotated.coeffs[1][k] += w * L.y * y[k];
        rotated.coeffs[2][k] += w * L.z * y[k];
      }
    }
  }

  Rng rng(62);
  auto a = half_cosine_coeffs();
  for (int trial = 0; trial < 12; ++trial) {
    Vec3 n = random_unit(rng);
    // Radiance closure: L'(d) == L(R^T d).
    Vec3 lhs = sh_eval(rotated, n);
    Vec3 rhs = sh_eval(light, rot_t(n));
    CHECK(lhs.x == doctest::Approx(rhs.x).scale(1.0).epsilon(1e-8));
    CHECK(lhs.y == doctest::Approx(rhs.y).scale(1.0).epsilon(1e-8));
    CHECK(lhs.z == doctest::Approx(rhs.z).scale(1.0).epsilon(1e-8));
    // Convolution closure: the per-band product rotates with the light.
    auto yb_n = basis_at(n);
    auto yb_rn = basis_at(rot_t(n));
    for (int ch = 0; ch < 3; ++ch) {
      double shade_rot = 0.0, shade_orig = 0.0;
      for (int l = 0; l < kShBands; ++l) {
        for (int m = -l; m <= l; ++m) {
          int k = l * (l + 1) + m;
          shade_rot += a[l] * rotated.coeffs[ch][k] * yb_n[k];
          shade_orig += a[l] * light.coeffs[ch][k] * yb_rn[k];
        }
      }
      CHECK(shade_rot == doctest::Approx(shade_orig).scale(1.0).epsilon(1e-8));
    }
  }
}

}  // TEST_SUITE
