#include "facefit/losses.h"

#include <cmath>
#include <stdexcept>

namespace facefit {

LossWeights schedule_weights(const LossWeights& base, int round) {
  LossWeights w = base;
  double f = std::pow(base.halving_factor, double(round));
  w.med_w_c_diff = base.med_w_c_diff / f;
  w.fine_w_c = base.fine_w_c / f;
  return w;
}

DiffValue prior_loss(const std::vector<DiffValue>& alpha, const std::vector<DiffValue>& beta,
                     const ModelBundle& bundle) {
  std::vector<DiffValue> terms;
  terms.reserve(alpha.size() + beta.size());
  for (std::size_t k = 0; k < alpha.size(); ++k)
    terms.push_back(sq(alpha[k]) * (1.0 / bundle.prior_var_shape[k]));
  for (std::size_t k = 0; k < beta.size(); ++k)
    terms.push_back(sq(beta[k]) * (1.0 / bundle.prior_var_refl[k]));
  if (terms.empty()) return DiffValue(0.0);
  return fsum(terms);
}

namespace {

DiffValue hinge_box(const DiffValue& x) {
  return sq(max(DiffValue(0.0), -x)) + sq(max(DiffValue(0.0), x - 1.0));
}

}  // namespace

DiffValue softbox_loss(const std::vector<DiffValue>& xs) {
  std::vector<DiffValue> terms;
  terms.reserve(xs.size());
  for (const DiffValue& x : xs) terms.push_back(hinge_box(x));
  if (terms.empty()) return DiffValue(0.0);
  return fsum(terms);
}

DiffValue softbox_loss_map(const UvMapD& map) {
  std::vector<DiffValue> terms;
  terms.reserve(map.data.size());
  for (const DiffValue& x : map.data) terms.push_back(hinge_box(x));
  if (terms.empty()) return DiffValue(0.0);
  return fsum(terms);
}

DiffValue symmetry_loss(const UvMapD& map) {
  std::vector<DiffValue> terms;
  terms.reserve(map.data.size());
  for (int y = 0; y < map.res; ++y)
    for (int x = 0; x < map.res; ++x)
      for (int c = 0; c < map.channels; ++c)
        terms.push_back(abs(map.at(x, y, c) - map.at(map.res - 1 - x, y, c)));
  return fsum(terms) * (1.0 / double(terms.size()));
}

DiffValue consistency_loss(const UvMapD& refined, const UvMapD& base) {
  if (refined.res != base.res || refined.channels != base.channels)
    throw std::runtime_error("losses: consistency map resolution mismatch");
  std::vector<DiffValue> terms;
  terms.reserve(refined.data.size());
  for (std::size_t i = 0; i < refined.data.size(); ++i)
    terms.push_back(abs(refined.data[i] - base.data[i]));
  double texels = double(refined.res) * refined.res;
  return fsum(terms) * (1.0 / texels);
}

DiffValue smoothness_loss(const UvMapD& map) {
  std::vector<DiffValue> terms;
  terms.reserve(map.data.size());
  for (int y = 0; y < map.res; ++y) {
    for (int x = 0; x < map.res; ++x) {
      int nx[4] = {x - 1, x + 1, x, x};
      int ny[4] = {y, y, y - 1, y + 1};
      for (int c = 0; c < map.channels; ++c) {
        DiffValue ring[4];
        double w[4];
        int n = 0;
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || ny[k] < 0 || nx[k] >= map.res || ny[k] >= map.res) continue;
          ring[n] = map.at(nx[k], ny[k], c);
          ++n;
        }
        for (int k = 0; k < n; ++k) w[k] = 1.0 / double(n);
        DiffValue mean = faffine(0.0, std::span<const double>(w, n),
                                 std::span<const DiffValue>(ring, n));
        terms.push_back(sq(map.at(x, y, c) - mean));
      }
    }
  }
  double texels = double(map.res) * map.res;
  return fsum(terms) * (1.0 / texels);
}

DiffValue smoothness_loss_mesh(const std::vector<DVec3>& field, const ModelBundle& bundle) {
  // First-ring adjacency from the triangle list.
  std::size_t n = field.size();
  std::vector<std::vector<int>> ring(n);
  auto link = [&](int a, int b) {
    for (int seen : ring[a])
      if (seen == b) return;
    ring[a].push_back(b);
  };
  for (std::size_t t = 0; t + 2 < bundle.triangles.size(); t += 3) {
    int i0 = bundle.triangles[t], i1 = bundle.triangles[t + 1], i2 = bundle.triangles[t + 2];
    link(i0, i1);
    link(i1, i0);
    link(i1, i2);
    link(i2, i1);
    link(i2, i0);
    link(i0, i2);
  }
  std::vector<DiffValue> terms;
  terms.reserve(n);
  std::vector<DiffValue> xs;
  std::vector<double> ws;
  for (std::size_t i = 0; i < n; ++i) {
    if (ring[i].empty()) continue;
    const DiffValue* comp_i[3] = {&field[i].x, &field[i].y, &field[i].z};
    DiffValue acc(0.0);
    for (int c = 0; c < 3; ++c) {
      xs.clear();
      ws.clear();
      for (int j : ring[i]) {
        const DiffValue* comp_j[3] = {&field[j].x, &field[j].y, &field[j].z};
        xs.push_back(*comp_j[c]);
        ws.push_back(1.0 / double(ring[i].size()));
      }
      DiffValue mean = faffine(0.0, ws, xs);
      acc = acc + sq(*comp_i[c] - mean);
    }
    terms.push_back(acc);
  }
  if (terms.empty()) return DiffValue(0.0);
  return fsum(terms) * (1.0 / double(terms.size()));
}

UvMapD bake_albedo_map(const SceneEval& se, bool specular) {
  const UvAtlas& atlas = se.bundle->atlas;
  const std::vector<DVec3>& per_vertex = specular ? se.albedos.specular : se.albedos.diffuse;
  UvMapD map(atlas.res, 3, DiffValue(0.0));
  for (int y = 0; y < atlas.res; ++y) {
    for (int x = 0; x < atlas.res; ++x) {
      std::size_t at = std::size_t(y) * atlas.res + x;
      int t = atlas.tri[at];
      if (t < 0) continue;
      const int* idx = &se.bundle->triangles[3 * t];
      const double* b = &atlas.bary[3 * at];
      for (int c = 0; c < 3; ++c) {
        const DVec3 &a0 = per_vertex[idx[0]], &a1 = per_vertex[idx[1]], &a2 = per_vertex[idx[2]];
        const DiffValue* ch0[3] = {&a0.x, &a0.y, &a0.z};
        const DiffValue* ch1[3] = {&a1.x, &a1.y, &a1.z};
        const DiffValue* ch2[3] = {&a2.x, &a2.y, &a2.z};
        const DiffValue xs[3] = {*ch0[c], *ch1[c], *ch2[c]};
        map.at(x, y, c) = faffine(0.0, std::span<const double>(b, 3), xs);
      }
    }
  }
  return map;
}

UvMapD compose_map(const UvMapD& base, const UvMapD* inc1, const UvMapD* inc2) {
  UvMapD out = base;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (inc1) out.data[i] = out.data[i] + inc1->data[i];
    if (inc2) out.data[i] = out.data[i] + inc2->data[i];
  }
  return out;
}

UvMapD detach_map(const UvMapD& map) {
  UvMapD out = map;
  for (DiffValue& x : out.data) x = detach(x);
  return out;
}

SampledPlans build_plans(const SceneEval& se, int spp, std::uint64_t seed) {
  Tape::Pause pause;
  SampledPlans out;
  Bvh bvh(se.values.vertices, se.bundle->triangles);
  out.ray = build_ray_plan(
      bvh, se.camera_v,
      [&](const PixelHit& h) { return hit_frame_values(se, h.tri, h.b1, h.b2); },
      se.values.scene_scale, se.kernels.exponent, spp, seed);
  DepthBuffer db = rasterize_depth(se.values.vertices, se.bundle->triangles, se.camera_v,
                                   se.camera_v.k);
  out.vertex_visible = vertex_visibility(se.values, se.camera_v, db);

  std::uint64_t h = out.ray.fingerprint;
  for (std::uint8_t v : out.vertex_visible) {
    h ^= v + 1;
    h *= 1099511628211ull;
  }
  out.fingerprint = h;
  return out;
}

namespace {

struct DataTerms {
  DiffValue ray, vertex, landmarks;
};

DataTerms data_terms(const SceneEval& se, const SampledPlans& plans, const Image& target,
                     const std::vector<Vec2>* landmarks, const LossWeights& w) {
  DataTerms out{DiffValue(0.0), DiffValue(0.0), DiffValue(0.0)};

  // Ray term: replay the plan at every covered pixel.
  std::vector<int> covered;
  std::vector<DVec3> radiance;
  for (std::size_t i = 0; i < plans.ray.pixels.size(); ++i) {
    const PixelPlan& pp = plans.ray.pixels[i];
    if (!pp.hit.covered()) continue;
    SurfacePointD sp = eval_surface_point(se, pp.hit.tri, pp.hit.b1, pp.hit.b2);
    covered.push_back(int(i));
    radiance.push_back(mc_radiance(pp, sp, se.env, se.kernels.exponent));
  }
  out.ray = ray_photo_loss(plans.ray, covered, radiance, target);

  // Vertex term: analytic irradiance at visible vertices.
  std::size_t n = se.mesh.vertices.size();
  std::vector<DVec3> shaded(n, DVec3{DiffValue(0.0), DiffValue(0.0), DiffValue(0.0)});
  std::vector<DVec2> projected(n, DVec2{DiffValue(0.0), DiffValue(0.0)});
  for (std::size_t i = 0; i < n; ++i) {
    if (!plans.vertex_visible[i]) continue;
    SurfacePointD sp = eval_surface_vertex(se, int(i));
    shaded[i] = shade_surface(se, sp);
    projected[i] = project(se.camera, se.mesh.vertices[i]).pixel;
  }
  out.vertex = vertex_photo_loss(shaded, projected, plans.vertex_visible, target);

  if (w.w_lm > 0.0) {
    if (!landmarks) throw std::runtime_error("losses: landmarks required when w_lm > 0");
    std::vector<DVec2> lm;
    lm.reserve(se.bundle->landmark_ids.size());
    for (int id : se.bundle->landmark_ids)
      lm.push_back(project(se.camera, se.mesh.vertices[id]).pixel);
    out.landmarks = landmark_loss(lm, *landmarks);
  }
  return out;
}

}  // namespace

LossBreakdown stage_loss(Stage stage, const SceneEval& se, const SampledPlans& plans,
                         const Image& target, const std::vector<Vec2>* landmarks,
                         const LossWeights& w) {
  const SceneLift& lift = *se.lift;
  LossBreakdown out;

  DataTerms data = data_terms(se, plans, target, landmarks, w);
  DiffValue total = data.ray + w.w_dr * data.vertex + w.w_lm * data.landmarks;
  out.terms["E_ph_ray"] = data.ray.v;
  out.terms["E_ph_vertex"] = data.vertex.v;
  out.terms["E_land"] = data.landmarks.v;

  if (stage == Stage::kCoarse) {
    DiffValue prior = prior_loss(lift.alpha, lift.beta, *se.bundle);
    DiffValue box = softbox_loss(lift.delta);
    total = total + prior + box;
    out.terms["E_prior"] = prior.v;
    out.terms["E_box"] = box.v;
  } else if (stage == Stage::kMedium) {
    UvMapD diff_base = bake_albedo_map(se, false);
    UvMapD spec_base = bake_albedo_map(se, true);
    UvMapD diff_map = compose_map(diff_base, &lift.medium_diffuse, nullptr);
    UvMapD spec_map = compose_map(spec_base, &lift.medium_specular, nullptr);
    DiffValue sym = symmetry_loss(diff_map) + symmetry_loss(spec_map);
    DiffValue cons_d = consistency_loss(diff_map, diff_base);
    DiffValue cons_s = consistency_loss(spec_map, spec_base);
    DiffValue smooth = smoothness_loss(diff_map) + smoothness_loss(spec_map);
    DiffValue box = softbox_loss_map(diff_map) + softbox_loss_map(spec_map);
    total = total + w.med_w_s * sym + w.med_w_c_diff * cons_d + w.med_w_c_spec * cons_s +
            w.med_w_m * smooth + w.med_w_b * box;
    out.terms["E_sym"] = sym.v;
    out.terms["E_cons"] = cons_d.v + cons_s.v;
    out.terms["E_smooth"] = smooth.v;
    out.terms["E_box"] = box.v;
  } else {
    UvMapD base;
    {
      // Frozen medium result: the fine consistency target carries no gradient.
      Tape::Pause pause;
      base = compose_map(bake_albedo_map(se, false), &lift.medium_diffuse, nullptr);
    }
    UvMapD diff_map = compose_map(base, &lift.fine_diffuse, nullptr);
    DiffValue sym = symmetry_loss(diff_map);
    DiffValue cons = consistency_loss(diff_map, base);
    DiffValue smooth = smoothness_loss(diff_map) + smoothness_loss(lift.fine_normal);
    DiffValue box = softbox_loss_map(diff_map);
    total = total + w.fine_w_s * sym + w.fine_w_c * cons + w.fine_w_m * smooth + w.fine_w_b * box;
    out.terms["E_sym"] = sym.v;
    out.terms["E_cons"] = cons.v;
    out.terms["E_smooth"] = smooth.v;
    out.terms["E_box"] = box.v;
  }

  out.total = total;
  out.terms["total"] = total.v;
  return out;
}

}  // namespace facefit
