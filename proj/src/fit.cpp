#include "facefit/fit.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "facefit/metrics.h"
#include "facefit/raster.h"
#include "facefit/rng.h"

namespace facefit {

void adam_step(AdamState& st, std::span<double> params, std::span<const double> grad, double lr,
               double beta1, double beta2, double eps) {
  if (params.size() != grad.size()) throw std::runtime_error("fit: adam shape mismatch");
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size()) throw std::runtime_error("fit: adam state shape mismatch");
  st.t += 1;
  double bc1 = 1.0 - std::pow(beta1, double(st.t));
  double bc2 = 1.0 - std::pow(beta2, double(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = st.m[i] / bc1;
    double vhat = st.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

SceneParams initialize_params(const ModelBundle& bundle, const Image& target,
                              const std::vector<Vec2>& landmarks, const FitConfig& cfg) {
  if (landmarks.size() != kNumLandmarks) throw std::runtime_error("fit: landmark count must be 68");
  SceneParams p = SceneParams::init_for(bundle, cfg.roughness);

  // Pose: identity rotation; depth from the ratio of focal-scaled model
  // landmark spread to image landmark spread, then the camera center matched
  // so the landmark centroids align.
  Vec3 c3{0, 0, 0};
  Vec2 c2{0, 0};
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    c3 = c3 + bundle.vertex_mean(bundle.landmark_ids[i]);
    c2 = c2 + landmarks[i];
  }
  c3 = c3 * (1.0 / double(kNumLandmarks));
  c2 = c2 * (1.0 / double(kNumLandmarks));
  double s3 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    Vec3 d3 = bundle.vertex_mean(bundle.landmark_ids[i]) - c3;
    Vec2 d2 = landmarks[i] - c2;
    s3 += d3.x * d3.x + d3.y * d3.y;
    s2 += d2.x * d2.x + d2.y * d2.y;
  }
  s3 = std::sqrt(s3 / double(kNumLandmarks));
  s2 = std::sqrt(s2 / double(kNumLandmarks));
  if (s2 <= 0.0) throw std::runtime_error("fit: degenerate landmark spread");
  double depth = cfg.focal * s3 / s2;

  CameraIntrinsics intr;
  intr.f = cfg.focal;
  intr.width = target.width;
  intr.height = target.height;
  intr.cx = 0.5 * target.width;
  intr.cy = 0.5 * target.height;
  double x_cam = (c2.x - intr.cx) * depth / cfg.focal;
  double y_cam = (c2.y - intr.cy) * depth / cfg.focal;
  p.rot = Vec3{0, 0, 0};
  p.trans = c3 - Vec3{x_cam, y_cam, depth};

  // Light: gray DC level so the mean statistical albedo shades to the mean
  // image brightness.
  double img_mean = 0.0;
  std::size_t counted = 0;
  for (int y = 0; y < target.height; ++y) {
    for (int x = 0; x < target.width; ++x) {
      double l = target.channels >= 3
                     ? luminance(target.at(x, y, 0), target.at(x, y, 1), target.at(x, y, 2))
                     : double(target.at(x, y, 0));
      if (l > 0.0) {
        img_mean += l;
        ++counted;
      }
    }
  }
  img_mean = counted ? img_mean / double(counted) : 0.5;
  double albedo_mean = 0.0;
  for (double v : bundle.mean_diffuse) albedo_mean += v;
  albedo_mean /= double(bundle.mean_diffuse.size());
  if (albedo_mean <= 0.0) albedo_mean = 0.5;
  const double y00 = 0.28209479177387814;
  double dc = img_mean / (albedo_mean * y00);
  for (int c = 0; c < 3; ++c) p.light.coeffs[c][0] = dc;
  return p;
}

namespace {

std::uint64_t derived_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return Rng::keyed(base, a, b, 0xf17).next_u64();
}

struct TrainBlock {
  std::string name;
  double lr;
  // First iteration at which this block starts taking steps.  Until the
  // shading blocks (light, reflectance) roughly match the target, the
  // photometric gradients on pose and shape point in essentially arbitrary
  // directions, and the first few full-size steps knock the
  // landmark-initialized pose several pixels off before annealing can damp
  // them.  Holding pose and shape for the first quarter of the coarse stage
  // lets shading settle first, and each block's anneal clock starts at its
  // own activation so late starters still get full-size early steps.
  int start = 0;
};

// Pose blocks live in physical units (radians, millimeters) while every other
// block is roughly unit-variance, so a shared learning rate would move them by
// wildly different amounts in image space.  These factors normalize the Adam
// step so one step shifts the projected mesh or the rendered shading by a
// comparable small amount regardless of block: 0.005 rad of rotation and 1 mm
// of translation are about the same retinal motion as 0.01 of a shape or
// reflectance coefficient whose basis column has a few-millimeter or
// few-percent amplitude.  Adam steps are close to +-lr per coordinate under
// the stochastic per-iteration gradients, so unscaled coefficient and light
// steps of 0.05 would random-walk those blocks faster than the loss surface
// can pull them back.
double block_step_scale(const std::string& name) {
  if (name == "rot") return 0.1;
  if (name == "trans") return 20.0;
  if (name == "light") return 0.1;
  return 0.2;  // alpha, delta, beta
}

// Within a stage the per-iteration sample plans are redrawn, so late in a
// stage the sign-normalized Adam steps mostly chase sampling noise; halving
// the step a few times over the stage quenches that diffusion and lets the
// blocks settle.  Four half-lives over a stage leaves a 1/16 final step.
double stage_anneal(int iter, int iters) {
  double half_life = std::max(1.0, double(iters) / 4.0);
  return std::pow(0.5, double(iter) / half_life);
}

std::vector<TrainBlock> stage_blocks(Stage stage, const FitConfig& cfg) {
  const char* coarse[] = {"alpha", "delta", "beta", "rot", "trans", "light"};
  const char* shading_first[] = {"beta", "light"};
  std::vector<TrainBlock> out;
  switch (stage) {
    case Stage::kCoarse: {
      int warmup = cfg.coarse_iters / 4;
      for (const char* n : coarse) {
        bool warm = std::find_if(std::begin(shading_first), std::end(shading_first),
                                 [&](const char* m) { return std::string(m) == n; }) !=
                    std::end(shading_first);
        out.push_back({n, cfg.lr_coeffs * block_step_scale(n), warm ? 0 : warmup});
      }
      break;
    }
    case Stage::kMedium:
      out.push_back({"medium_diffuse", cfg.lr_maps});
      out.push_back({"medium_specular", cfg.lr_maps});
      for (const char* n : coarse)
        out.push_back({n, cfg.lr_coeffs * cfg.co_refine_scale * block_step_scale(n)});
      break;
    case Stage::kFine:
      out.push_back({"fine_diffuse", cfg.lr_maps});
      out.push_back({"fine_normal", cfg.lr_maps});
      break;
  }
  return out;
}

// Keep detail normals unit with a positive z so the tangent frame transform
// stays well-posed.
void project_normal_map(UvMap& m) {
  for (int y = 0; y < m.res; ++y) {
    for (int x = 0; x < m.res; ++x) {
      Vec3 v{m.at(x, y, 0), m.at(x, y, 1), m.at(x, y, 2)};
      double n = norm(v);
      v = n > 1e-9 ? v * (1.0 / n) : Vec3{0, 0, 1};
      v.z = std::max(v.z, 0.05);
      v = normalized(v);
      m.at(x, y, 0) = v.x;
      m.at(x, y, 1) = v.y;
      m.at(x, y, 2) = v.z;
    }
  }
}

CameraIntrinsics intrinsics_for(const Image& target, const FitConfig& cfg) {
  CameraIntrinsics intr;
  intr.f = cfg.focal;
  intr.width = target.width;
  intr.height = target.height;
  intr.cx = 0.5 * target.width;
  intr.cy = 0.5 * target.height;
  return intr;
}

}  // namespace

FitResult fit(const ModelBundle& bundle, const Image& target, const std::vector<Vec2>& landmarks,
              const SceneParams& initial, const FitConfig& cfg, const std::string& out_dir) {
  FitResult result;
  result.params = initial;
  CameraIntrinsics intr = intrinsics_for(target, cfg);

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir + "/fit_log.csv");
    if (!log) throw std::runtime_error("fit: cannot write fit_log.csv in " + out_dir);
  }

  const Stage stages[3] = {Stage::kCoarse, Stage::kMedium, Stage::kFine};
  const int iters[3] = {cfg.coarse_iters, cfg.medium_iters, cfg.fine_iters};
  Tape tape;

  for (int s = 0; s < 3; ++s) {
    Stage stage = stages[s];
    result.traces[s].stage = stage;
    std::vector<TrainBlock> blocks = stage_blocks(stage, cfg);
    std::map<std::string, AdamState> adam;

    for (int iter = 0; iter < iters[s]; ++iter) {
      int round = iter / cfg.weights.round_iters;
      LossWeights w = schedule_weights(cfg.weights, round);

      tape.clear();
      LossBreakdown lb;
      SceneLift lift;
      {
        Tape::Scope scope(tape);
        lift = lift_scene(tape, result.params);
        SceneEval se = make_scene_eval(bundle, lift, intr);
        SampledPlans plans = build_plans(se, cfg.spp, derived_seed(cfg.seed, s, iter));
        try {
          lb = stage_loss(stage, se, plans, target, &landmarks, w);
        } catch (const RecordError& e) {
          throw std::runtime_error(std::string("fit: loss diverged at ") + stage_name(stage) +
                                   " iteration " + std::to_string(iter) + " (" + e.what() + ")");
        }
      }
      if (!std::isfinite(lb.total.v))
        throw std::runtime_error(std::string("fit: loss diverged at ") + stage_name(stage) +
                                 " iteration " + std::to_string(iter));

      std::vector<double> adj = tape.backward(lb.total.id);
      for (const TrainBlock& b : blocks) {
        if (iter < b.start) continue;
        double anneal = stage_anneal(iter - b.start, iters[s] - b.start);
        std::vector<double> g = gather(adj, lift.block_ids(b.name));
        adam_step(adam[b.name], block_view(result.params, b.name), g, b.lr * anneal,
                  cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      }
      if (stage == Stage::kFine) project_normal_map(result.params.fine_normal);

      result.traces[s].total.push_back(lb.terms.at("total"));
      if (log) {
        // Each stage has its own term set, so each stage opens with its own
        // header line.
        if (iter == 0) {
          log << "stage,iter";
          for (const auto& [k, v] : lb.terms) log << "," << k;
          log << "\n";
        }
        log << stage_name(stage) << "," << iter;
        log.precision(12);
        for (const auto& [k, v] : lb.terms) log << "," << v;
        log << "\n";
      }
    }

    if (!out_dir.empty()) {
      RenderOutput render =
          trace(bundle, result.params, intr, cfg.artifact_spp, derived_seed(cfg.seed, 100 + s, 0));
      result.stage_renders[s] = render.image;
      result.stage_normals[s] = render.normal;
      result.stage_masks[s] = render.mask;
      std::string base = out_dir + "/render_" + stage_name(stage);
      write_pfm(base + ".pfm", render.image);
      write_png(base + ".png", tonemap(render.image));
      write_pfm(out_dir + "/normal_" + stage_name(stage) + ".pfm", render.normal);
    }
  }

  if (!out_dir.empty()) {
    save_params(out_dir, result.params);
    EnvMap env = bake_envmap(result.params.light);
    write_pfm(out_dir + "/envmap.pfm", env.radiance);
    SceneLift lift = lift_const_scene(result.params);
    MeshValues mesh = mesh_values(eval_geometry(bundle, lift));
    write_obj(out_dir + "/mesh.obj", mesh, bundle);
  }
  return result;
}

AblationReport ablation_hybrid(const ModelBundle& bundle, const Image& target,
                               const std::vector<Vec2>& landmarks,
                               const std::vector<Vec3>& gt_vertices, const FitConfig& cfg,
                               int num_seeds) {
  if (num_seeds < 1) throw std::runtime_error("fit: ablation needs at least one seed");
  AblationReport report;
  report.hybrid.w_dr = cfg.weights.w_dr;
  report.ray_only.w_dr = 0.0;

  FitConfig run_cfg = cfg;
  run_cfg.medium_iters = 0;
  run_cfg.fine_iters = 0;

  for (int s = 0; s < num_seeds; ++s) {
    std::uint64_t seed = derived_seed(cfg.seed, 0xab1a, std::uint64_t(s));
    report.seeds.push_back(seed);

    std::vector<Vec2> noisy = landmarks;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      Rng rng = Rng::keyed(seed, i, 0, 0x10ca1);
      noisy[i].x += report.landmark_noise_px * rng.normal();
      noisy[i].y += report.landmark_noise_px * rng.normal();
    }

    for (int arm = 0; arm < 2; ++arm) {
      FitConfig arm_cfg = run_cfg;
      arm_cfg.seed = seed;
      arm_cfg.weights.w_dr = arm == 0 ? cfg.weights.w_dr : 0.0;
      SceneParams init = initialize_params(bundle, target, noisy, arm_cfg);
      FitResult fitres = fit(bundle, target, noisy, init, arm_cfg);
      SceneLift lift = lift_const_scene(fitres.params);
      MeshValues mesh = mesh_values(eval_geometry(bundle, lift));
      MetricReport err = vertex_position_error(mesh.vertices, gt_vertices);
      (arm == 0 ? report.hybrid : report.ray_only).errors.push_back(err.mean);
    }
  }

  for (AblationArm* arm : {&report.hybrid, &report.ray_only}) {
    double m = 0.0;
    for (double e : arm->errors) m += e;
    m /= double(arm->errors.size());
    double var = 0.0;
    for (double e : arm->errors) var += (e - m) * (e - m);
    arm->mean = m;
    arm->stddev = std::sqrt(var / double(arm->errors.size()));
  }
  return report;
}

std::string ablation_json(const AblationReport& r) {
  std::ostringstream out;
  out.precision(12);
  auto arm = [&](const AblationArm& a) {
    out << "{\"w_dr\": " << a.w_dr << ", \"mean\": " << a.mean << ", \"stddev\": " << a.stddev
        << ", \"per_seed\": [";
    for (std::size_t i = 0; i < a.errors.size(); ++i) out << (i ? ", " : "") << a.errors[i];
    out << "]}";
  };
  out << "{\n  \"hybrid\": ";
  arm(r.hybrid);
  out << ",\n  \"ray_only\": ";
  arm(r.ray_only);
  out << ",\n  \"landmark_noise_px\": " << r.landmark_noise_px << ",\n  \"seeds\": [";
  for (std::size_t i = 0; i < r.seeds.size(); ++i) out << (i ? ", " : "") << r.seeds[i];
  out << "]\n}\n";
  return out.str();
}

}  // namespace facefit
