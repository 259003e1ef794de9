#include "facefit/ray_renderer.h"

#include <cmath>
#include <stdexcept>

#include "facefit/rng.h"

namespace facefit {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Branchless orthonormal frame about a unit vector.
void onb(const Vec3& n, Vec3& t, Vec3& b) {
  double sign = n.z >= 0.0 ? 1.0 : -1.0;
  double a = -1.0 / (sign + n.z);
  double c = n.x * n.y * a;
  t = Vec3{1.0 + sign * n.x * n.x * a, sign * c, -sign * n.x};
  b = Vec3{c, sign + n.y * n.y * a, -n.y};
}

DiffValue axis_cos(const DVec3& axis, const Vec3& dir) {
  const double w[3] = {dir.x, dir.y, dir.z};
  const DiffValue x[3] = {axis.x, axis.y, axis.z};
  return faffine(0.0, w, x);
}

struct FnvHash {
  std::uint64_t h = 1469598103934665603ull;
  void mix(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  }
};

}  // namespace

Vec3 pixel_ray_dir(const Camera& cam, double px, double py) {
  Vec3 local{(px - cam.k.cx) / cam.k.f, (py - cam.k.cy) / cam.k.f, 1.0};
  return normalized(cam.R.apply(local));
}

PixelHit trace_primary(const Bvh& bvh, const Camera& cam, int x, int y) {
  Vec3 dir = pixel_ray_dir(cam, x + 0.5, y + 0.5);
  RayHit h = bvh.intersect(cam.t, dir, 0.0, 1e30);
  PixelHit out;
  if (h.hit()) {
    out.tri = h.tri;
    out.b1 = h.b1;
    out.b2 = h.b2;
    out.t = h.t;
  }
  return out;
}

void plan_pixel_samples(PixelPlan& plan, const HitFrame& frame, const Bvh& bvh,
                        double scene_scale, double lobe_exponent, int spp, std::uint64_t seed,
                        std::uint64_t pixel_index, bool shadow_test) {
  plan.diffuse.resize(spp);
  plan.specular.resize(spp);
  Vec3 origin = frame.point + frame.geo_normal * (1e-4 * scene_scale);

  Vec3 nt, nb;
  onb(frame.shading_normal, nt, nb);
  for (int k = 0; k < spp; ++k) {
    Rng rng = Rng::keyed(seed, pixel_index, std::uint64_t(k), 0);
    double u1 = rng.next_double(), u2 = rng.next_double();
    double ct = std::sqrt(1.0 - u1), st = std::sqrt(u1);
    double phi = kTwoPi * u2;
    Vec3 dir = nt * (st * std::cos(phi)) + nb * (st * std::sin(phi)) + frame.shading_normal * ct;
    plan.diffuse[k] = {dir, ct,
                       std::uint8_t(shadow_test && bvh.occluded(origin, dir, 0.0, 1e30) ? 0 : 1)};
  }

  Vec3 rt, rb;
  onb(frame.reflection, rt, rb);
  for (int k = 0; k < spp; ++k) {
    Rng rng = Rng::keyed(seed, pixel_index, std::uint64_t(k), 1);
    double u1 = rng.next_double(), u2 = rng.next_double();
    double ct = std::pow(1.0 - u1, 1.0 / (lobe_exponent + 1.0));  // in (0, 1]
    double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    double phi = kTwoPi * u2;
    Vec3 dir = rt * (st * std::cos(phi)) + rb * (st * std::sin(phi)) + frame.reflection * ct;
    plan.specular[k] = {dir, ct,
                        std::uint8_t(shadow_test && bvh.occluded(origin, dir, 0.0, 1e30) ? 0 : 1)};
  }
}

RayPlan build_ray_plan(const Bvh& bvh, const Camera& cam, const HitFrameFn& frame_at,
                       double scene_scale, double lobe_exponent, int spp, std::uint64_t seed,
                       bool shadow_test) {
  RayPlan plan;
  plan.width = cam.k.width;
  plan.height = cam.k.height;
  plan.spp = spp;
  plan.seed = seed;
  plan.pixels.resize(std::size_t(plan.width) * plan.height);

  FnvHash fp;
  for (int y = 0; y < plan.height; ++y) {
    for (int x = 0; x < plan.width; ++x) {
      std::size_t at = std::size_t(y) * plan.width + x;
      PixelPlan& pp = plan.pixels[at];
      pp.hit = trace_primary(bvh, cam, x, y);
      fp.mix(std::uint64_t(pp.hit.tri + 1));
      if (!pp.hit.covered()) continue;
      HitFrame f = frame_at(pp.hit);
      plan_pixel_samples(pp, f, bvh, scene_scale, lobe_exponent, spp, seed, at, shadow_test);
      std::uint64_t bits = 0;
      for (int k = 0; k < spp; ++k)
        bits = bits * 3 + pp.diffuse[k].visible + 2 * std::uint64_t(pp.specular[k].visible);
      fp.mix(bits);
    }
  }
  plan.fingerprint = fp.h;
  return plan;
}

DVec3 mc_radiance(const PixelPlan& plan, const SurfacePointD& sp, const EnvMapD& env,
                  double lobe_exponent) {
  const int spp = int(plan.diffuse.size());
  const double inv_spp = 1.0 / double(spp);

  std::vector<DiffValue> dsum[3], ssum[3];
  for (int c = 0; c < 3; ++c) {
    dsum[c].reserve(spp);
    ssum[c].reserve(spp);
  }
  const DiffValue* diff_ch[3] = {&sp.diffuse.x, &sp.diffuse.y, &sp.diffuse.z};
  for (const LobeSample& s : plan.diffuse) {
    if (!s.visible) continue;
    DVec3 L = sample_envmap(env, s.dir);
    DiffValue ratio = axis_cos(sp.shading_normal, s.dir) * (1.0 / s.cos_ref);
    const DiffValue* L_ch[3] = {&L.x, &L.y, &L.z};
    for (int c = 0; c < 3; ++c) dsum[c].push_back(*diff_ch[c] * *L_ch[c] * ratio);
  }
  for (const LobeSample& s : plan.specular) {
    if (!s.visible) continue;
    DVec3 L = sample_envmap(env, s.dir);
    DiffValue ratio = axis_cos(sp.reflection, s.dir) * (1.0 / s.cos_ref);
    DiffValue w = pow(max(ratio, DiffValue(1e-12)), lobe_exponent);
    const DiffValue* L_ch[3] = {&L.x, &L.y, &L.z};
    for (int c = 0; c < 3; ++c) ssum[c].push_back(*L_ch[c] * w);
  }

  DiffValue s = sp.s_intensity;
  DiffValue one_minus_s = 1.0 - s;
  DVec3 out;
  DiffValue* out_ch[3] = {&out.x, &out.y, &out.z};
  for (int c = 0; c < 3; ++c) {
    DiffValue d = dsum[c].empty() ? DiffValue(0.0) : fsum(dsum[c]) * inv_spp;
    DiffValue sm = ssum[c].empty() ? DiffValue(0.0) : fsum(ssum[c]) * inv_spp;
    *out_ch[c] = one_minus_s * d + s * sm;
  }
  return out;
}

DiffValue ray_photo_loss(const RayPlan& plan, const std::vector<int>& covered,
                         const std::vector<DVec3>& radiance, const Image& target) {
  if (target.width != plan.width || target.height != plan.height)
    throw std::runtime_error("ray: target image dimensions mismatch");
  std::vector<DiffValue> terms;
  terms.reserve(covered.size());
  std::vector<std::uint8_t> hit(std::size_t(plan.width) * plan.height, 0);
  for (std::size_t i = 0; i < covered.size(); ++i) {
    int x = covered[i] % plan.width, y = covered[i] / plan.width;
    hit[covered[i]] = 1;
    const DVec3& r = radiance[i];
    const DiffValue* ch[3] = {&r.x, &r.y, &r.z};
    DiffValue term(0.0);
    for (int c = 0; c < 3; ++c)
      term = term + abs(*ch[c] - double(target.at(x, y, std::min(c, target.channels - 1))));
    terms.push_back(term);
  }
  // Pixels the trace misses still count against the target: traced radiance
  // there is zero, so the residual is the target value itself.  This keeps
  // the objective honest when the mesh under- or over-covers the image; the
  // contribution is a constant (coverage has no Monte-Carlo derivative), and
  // the vertex-based term supplies the silhouette gradient.
  double miss = 0.0;
  for (int y = 0; y < target.height; ++y)
    for (int x = 0; x < target.width; ++x)
      if (!hit[std::size_t(y) * plan.width + x])
        for (int c = 0; c < 3; ++c) miss += std::fabs(double(target.at(x, y, std::min(c, target.channels - 1))));
  if (miss != 0.0) terms.push_back(DiffValue(miss));
  if (terms.empty()) return DiffValue(0.0);
  return fsum(terms);
}

RenderOutput trace(const ModelBundle& bundle, const SceneParams& params,
                   const CameraIntrinsics& intr, int spp, std::uint64_t seed, bool shadow_test) {
  if (spp < 1) throw std::runtime_error("ray: spp must be >= 1");
  SceneLift lift = lift_const_scene(params);
  SceneEval se = make_scene_eval(bundle, lift, intr);
  Bvh bvh(se.values.vertices, bundle.triangles);

  RenderOutput out;
  out.image = Image(intr.width, intr.height, 3);
  out.normal = Image(intr.width, intr.height, 3);
  out.mask = Image(intr.width, intr.height, 1);
  out.hits.resize(std::size_t(intr.width) * intr.height);

  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      std::size_t at = std::size_t(y) * intr.width + x;
      PixelHit hit = trace_primary(bvh, se.camera_v, x, y);
      out.hits[at] = hit;
      if (!hit.covered()) continue;
      PixelPlan pp;
      pp.hit = hit;
      HitFrame f = hit_frame_values(se, hit.tri, hit.b1, hit.b2);
      plan_pixel_samples(pp, f, bvh, se.values.scene_scale, se.kernels.exponent, spp, seed, at,
                         shadow_test);
      SurfacePointD sp = eval_surface_point(se, hit.tri, hit.b1, hit.b2);
      DVec3 rad = mc_radiance(pp, sp, se.env, se.kernels.exponent);
      out.image.at(x, y, 0) = float(rad.x.v);
      out.image.at(x, y, 1) = float(rad.y.v);
      out.image.at(x, y, 2) = float(rad.z.v);
      out.normal.at(x, y, 0) = float(f.shading_normal.x);
      out.normal.at(x, y, 1) = float(f.shading_normal.y);
      out.normal.at(x, y, 2) = float(f.shading_normal.z);
      out.mask.at(x, y, 0) = 1.0f;
    }
  }
  return out;
}

}  // namespace facefit
