#include "facefit/sh.h"

#include <cmath>
#include <stdexcept>

namespace facefit {

namespace {

constexpr double kPi = 3.14159265358979323846;

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;  // exact in double up to 16!
}

// K[l][m] = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!)
const std::array<std::array<double, kShBands>, kShBands>& norm_table() {
  static const auto table = [] {
    std::array<std::array<double, kShBands>, kShBands> k{};
    for (int l = 0; l < kShBands; ++l)
      for (int m = 0; m <= l; ++m)
        k[l][m] = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * factorial(l - m) / factorial(l + m));
    return k;
  }();
  return table;
}

// Semi-normalized associated Legendre recurrence on Q_lm = P_lm / sin^m,
// which is polynomial in z; combined with c_m = Re[(x+iy)^m], s_m = Im[...],
// the full basis is polynomial in (x,y,z) and smooth at the poles.
template <class T>
void sh_basis_impl(const Vec3T<T>& dir, std::span<T> out) {
  const auto& K = norm_table();
  const double sqrt2 = std::sqrt(2.0);
  T c[kShBands], s[kShBands];
  c[0] = T(1.0);
  s[0] = T(0.0);
  for (int m = 1; m < kShBands; ++m) {
    c[m] = dir.x * c[m - 1] - dir.y * s[m - 1];
    s[m] = dir.x * s[m - 1] + dir.y * c[m - 1];
  }
  T q[kShBands][kShBands];
  q[0][0] = T(1.0);
  for (int m = 1; m < kShBands; ++m) q[m][m] = q[m - 1][m - 1] * (2.0 * m - 1.0);
  for (int m = 0; m + 1 < kShBands; ++m) q[m + 1][m] = dir.z * ((2.0 * m + 1.0) * q[m][m]);
  for (int m = 0; m < kShBands; ++m)
    for (int l = m + 2; l < kShBands; ++l)
      q[l][m] = (dir.z * ((2.0 * l - 1.0) * q[l - 1][m]) - (l + m - 1.0) * q[l - 2][m]) * (1.0 / (l - m));
  for (int l = 0; l < kShBands; ++l) {
    out[l * (l + 1)] = K[l][0] * q[l][0];
    for (int m = 1; m <= l; ++m) {
      T base = (sqrt2 * K[l][m]) * q[l][m];
      out[l * (l + 1) + m] = base * c[m];
      out[l * (l + 1) - m] = base * s[m];
    }
  }
}

void check_unit(double n2, std::size_t out_size) {
  if (out_size < kShCoeffs) throw std::runtime_error("sh: basis output needs 81 slots");
  if (std::fabs(std::sqrt(n2) - 1.0) > 1e-6) throw std::runtime_error("sh: non-unit direction");
}

// Legendre polynomial coefficients, P_l(t) = sum_k C[l][k] t^k.
constexpr double kLegendre[kShBands][kShBands] = {
    {1, 0, 0, 0, 0, 0, 0, 0, 0},
    {0, 1, 0, 0, 0, 0, 0, 0, 0},
    {-1.0 / 2, 0, 3.0 / 2, 0, 0, 0, 0, 0, 0},
    {0, -3.0 / 2, 0, 5.0 / 2, 0, 0, 0, 0, 0},
    {3.0 / 8, 0, -30.0 / 8, 0, 35.0 / 8, 0, 0, 0, 0},
    {0, 15.0 / 8, 0, -70.0 / 8, 0, 63.0 / 8, 0, 0, 0},
    {-5.0 / 16, 0, 105.0 / 16, 0, -315.0 / 16, 0, 231.0 / 16, 0, 0},
    {0, -35.0 / 16, 0, 315.0 / 16, 0, -693.0 / 16, 0, 429.0 / 16, 0},
    {35.0 / 128, 0, -1260.0 / 128, 0, 6930.0 / 128, 0, -12012.0 / 128, 0, 6435.0 / 128}};

}  // namespace

void sh_basis(const DVec3& dir, std::span<DiffValue> out) {
  check_unit(dot(value(dir), value(dir)), out.size());
  sh_basis_impl<DiffValue>(dir, out);
}

void sh_basis(const Vec3& dir, std::span<double> out) {
  check_unit(dot(dir, dir), out.size());
  sh_basis_impl<double>(dir, out);
}

std::array<double, kShBands> half_cosine_coeffs() {
  // Funk-Hecke zonal weights of clamp(cos)/pi: 2 * int_0^1 t P_l(t) dt.
  return {1.0, 2.0 / 3.0, 1.0 / 4.0, 0.0, -1.0 / 24.0, 0.0, 1.0 / 64.0, 0.0, -1.0 / 128.0};
}

double lobe_exponent(double roughness) {
  if (!(roughness > 0.0) || roughness > 1.0) throw std::runtime_error("sh: roughness must be in (0, 1]");
  return std::max(1.0, 2.0 / (roughness * roughness) - 2.0);
}

std::array<double, kShBands> brdf_kernel_coeffs(double roughness) {
  double p = lobe_exponent(roughness);
  // S_l = (p+1) * int_0^1 t^p P_l(t) dt, exact via the coefficient table:
  // int t^(p+k) = 1/(p+k+1).  Valid for any real p >= 0.
  std::array<double, kShBands> out{};
  for (int l = 0; l < kShBands; ++l) {
    double s = 0.0;
    for (int k = 0; k < kShBands; ++k)
      if (kLegendre[l][k] != 0.0) s += kLegendre[l][k] / (p + k + 1.0);
    out[l] = (p + 1.0) * s;
  }
  return out;
}

Vec3 sh_eval(const SHLight& light, const Vec3& dir) {
  double y[kShCoeffs];
  sh_basis(dir, y);
  Vec3 v{0, 0, 0};
  for (int i = 0; i < kShCoeffs; ++i) {
    v.x += light.coeffs[0][i] * y[i];
    v.y += light.coeffs[1][i] * y[i];
    v.z += light.coeffs[2][i] * y[i];
  }
  return v;
}

Vec3 EnvMap::texel_dir(int row, int col) const {
  double t = kPi * (row + 0.5) / size;
  double p = 2.0 * kPi * (col + 0.5) / size;
  return {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)};
}

const std::vector<double>& envmap_basis() {
  static const std::vector<double> basis = [] {
    std::vector<double> b(std::size_t(kEnvSize) * kEnvSize * kShCoeffs);
    EnvMap probe;
    for (int r = 0; r < kEnvSize; ++r)
      for (int c = 0; c < kEnvSize; ++c)
        sh_basis(probe.texel_dir(r, c),
                 std::span<double>(&b[(std::size_t(r) * kEnvSize + c) * kShCoeffs], kShCoeffs));
    return b;
  }();
  return basis;
}

EnvMap bake_envmap(const SHLight& light, bool clamp_negative) {
  EnvMap env;
  env.radiance = Image(env.size, env.size, 3);
  env.solid_angle.resize(env.size);
  const std::vector<double>& basis = envmap_basis();
  for (int r = 0; r < env.size; ++r) {
    double t0 = kPi * r / env.size, t1 = kPi * (r + 1) / env.size;
    env.solid_angle[r] = (2.0 * kPi / env.size) * (std::cos(t0) - std::cos(t1));
    for (int c = 0; c < env.size; ++c) {
      const double* y = &basis[(std::size_t(r) * env.size + c) * kShCoeffs];
      for (int ch = 0; ch < 3; ++ch) {
        double v = 0.0;
        for (int i = 0; i < kShCoeffs; ++i) v += light.coeffs[ch][i] * y[i];
        env.radiance.at(c, r, ch) = float(clamp_negative ? std::max(0.0, v) : v);
      }
    }
  }
  return env;
}

EnvMapD bake_envmap(const std::array<std::vector<DiffValue>, 3>& coeffs) {
  for (const auto& c : coeffs)
    if (c.size() != kShCoeffs) throw std::runtime_error("sh: light needs 81 coefficients per channel");
  EnvMapD env;
  env.radiance.resize(std::size_t(env.size) * env.size * 3);
  const std::vector<double>& basis = envmap_basis();
  for (int r = 0; r < env.size; ++r)
    for (int c = 0; c < env.size; ++c) {
      std::span<const double> y(&basis[(std::size_t(r) * env.size + c) * kShCoeffs], kShCoeffs);
      for (int ch = 0; ch < 3; ++ch)
        env.radiance[(std::size_t(r) * env.size + c) * 3 + ch] = max(DiffValue(0.0), faffine(0.0, y, coeffs[ch]));
    }
  return env;
}

namespace {

struct EnvLookup {
  int c0, c1, r0, r1;
  double ax, ay;
};

EnvLookup env_lookup(int size, const Vec3& dir) {
  double t = std::acos(std::clamp(dir.z, -1.0, 1.0));
  double p = std::atan2(dir.y, dir.x);
  if (p < 0.0) p += 2.0 * kPi;
  double col = p / (2.0 * kPi) * size - 0.5;
  double row = t / kPi * size - 0.5;
  double fc = std::floor(col), fr = std::floor(row);
  EnvLookup lu;
  lu.ax = col - fc;
  lu.ay = row - fr;
  lu.c0 = (int(fc) % size + size) % size;
  lu.c1 = (lu.c0 + 1) % size;  // phi wraps
  lu.r0 = std::clamp(int(fr), 0, size - 1);
  lu.r1 = std::clamp(int(fr) + 1, 0, size - 1);  // theta clamps at the poles
  return lu;
}

}  // namespace

DVec3 sample_envmap(const EnvMapD& env, const Vec3& dir) {
  EnvLookup lu = env_lookup(env.size, dir);
  DVec3 out;
  DiffValue* slot[3] = {&out.x, &out.y, &out.z};
  for (int ch = 0; ch < 3; ++ch) {
    DiffValue top = env.at(lu.c0, lu.r0, ch) * (1.0 - lu.ax) + env.at(lu.c1, lu.r0, ch) * lu.ax;
    DiffValue bot = env.at(lu.c0, lu.r1, ch) * (1.0 - lu.ax) + env.at(lu.c1, lu.r1, ch) * lu.ax;
    *slot[ch] = top * (1.0 - lu.ay) + bot * lu.ay;
  }
  return out;
}

Vec3 sample_envmap(const EnvMap& env, const Vec3& dir) {
  EnvLookup lu = env_lookup(env.size, dir);
  Vec3 out;
  double* slot[3] = {&out.x, &out.y, &out.z};
  for (int ch = 0; ch < 3; ++ch) {
    double top = env.radiance.at(lu.c0, lu.r0, ch) * (1.0 - lu.ax) + env.radiance.at(lu.c1, lu.r0, ch) * lu.ax;
    double bot = env.radiance.at(lu.c0, lu.r1, ch) * (1.0 - lu.ax) + env.radiance.at(lu.c1, lu.r1, ch) * lu.ax;
    *slot[ch] = top * (1.0 - lu.ay) + bot * lu.ay;
  }
  return out;
}

}  // namespace facefit
