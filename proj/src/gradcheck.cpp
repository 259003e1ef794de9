#include "facefit/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "facefit/rng.h"
#include "facefit/surface.h"

namespace facefit {

namespace {

struct KinkGuard {
  explicit KinkGuard(KinkTrace& t) : prev_(Tape::kinks()) {
    Tape::kinks() = &t;
    t.arm();
  }
  ~KinkGuard() {
    Tape::kinks()->disarm();
    Tape::kinks() = prev_;
  }
  KinkTrace* prev_;
};

CameraIntrinsics intrinsics_for(const Image& target, const FitConfig& cfg) {
  CameraIntrinsics intr;
  intr.f = cfg.focal;
  intr.width = target.width;
  intr.height = target.height;
  intr.cx = 0.5 * target.width;
  intr.cy = 0.5 * target.height;
  return intr;
}

std::vector<std::string> stage_block_names(Stage stage) {
  switch (stage) {
    case Stage::kCoarse:
      return {"alpha", "delta", "beta", "rot", "trans", "light"};
    case Stage::kMedium:
      return {"medium_diffuse", "medium_specular", "alpha", "delta", "beta", "rot", "trans",
              "light"};
    case Stage::kFine:
      return {"fine_diffuse", "fine_normal"};
  }
  return {};
}

bool is_map_block(const std::string& name) {
  return name == "medium_diffuse" || name == "medium_specular" || name == "fine_diffuse" ||
         name == "fine_normal";
}

// Loss at the given parameters with the sampling plan held fixed.  Records
// abs/min/max branch choices into `kinks`.
double frozen_loss(const ModelBundle& bundle, const SceneParams& params,
                   const CameraIntrinsics& intr, const SampledPlans& plans, Stage stage,
                   const Image& target, const std::vector<Vec2>& landmarks, const LossWeights& w,
                   KinkTrace& kinks) {
  KinkGuard guard(kinks);
  SceneLift lift = lift_const_scene(params);
  SceneEval se = make_scene_eval(bundle, lift, intr);
  LossBreakdown lb = stage_loss(stage, se, plans, target, &landmarks, w);
  return lb.total.v;
}

std::uint64_t plan_fingerprint(const ModelBundle& bundle, const SceneParams& params,
                               const CameraIntrinsics& intr, int spp, std::uint64_t seed) {
  SceneLift lift = lift_const_scene(params);
  SceneEval se = make_scene_eval(bundle, lift, intr);
  return build_plans(se, spp, seed).fingerprint;
}

}  // namespace

GradCheckReport gradcheck_stage(const ModelBundle& bundle, const SceneParams& params,
                                const Image& target, const std::vector<Vec2>& landmarks,
                                Stage stage, const FitConfig& cfg, int num_coords,
                                std::uint64_t seed) {
  if (num_coords < 1) throw std::runtime_error("gradcheck: need at least one coordinate");
  GradCheckReport report;
  report.stage = stage;
  CameraIntrinsics intr = intrinsics_for(target, cfg);
  LossWeights w = schedule_weights(cfg.weights, 0);

  // One fixed sampling plan for the whole check.
  Tape tape;
  SampledPlans plans;
  std::vector<double> adj;
  SceneLift lift;
  KinkTrace base_kinks;
  {
    Tape::Scope scope(tape);
    lift = lift_scene(tape, params);
    SceneEval se = make_scene_eval(bundle, lift, intr);
    plans = build_plans(se, cfg.spp, seed);
    KinkGuard guard(base_kinks);
    LossBreakdown lb = stage_loss(stage, se, plans, target, &landmarks, w);
    adj = tape.backward(lb.total.id);
  }

  std::vector<std::string> names = stage_block_names(stage);
  Rng rng = Rng::keyed(seed, 0x6c, 0, 0);

  for (int k = 0; k < num_coords; ++k) {
    const std::string& name = names[rng.next_below(std::uint32_t(names.size()))];
    SceneParams probe = params;
    std::span<double> view = block_view(probe, name);

    std::size_t idx;
    if (is_map_block(name)) {
      // Only texels the uv chart covers influence any loss term.
      const UvAtlas& atlas = bundle.atlas;
      int x, y;
      do {
        x = int(rng.next_below(std::uint32_t(atlas.res)));
        y = int(rng.next_below(std::uint32_t(atlas.res)));
      } while (!atlas.valid(x, y));
      int c = int(rng.next_below(3));
      idx = (std::size_t(y) * atlas.res + x) * 3 + c;
    } else {
      idx = rng.next_below(std::uint32_t(view.size()));
    }

    GradCheckEntry e;
    e.block = name;
    e.index = idx;
    e.analytic = gather(adj, lift.block_ids(name))[idx];

    const double h = kGradCheckStep;
    double base_val = view[idx];

    view[idx] = base_val + h;
    KinkTrace kp;
    double lp = frozen_loss(bundle, probe, intr, plans, stage, target, landmarks, w, kp);
    std::uint64_t fp_plus = plan_fingerprint(bundle, probe, intr, cfg.spp, seed);

    view[idx] = base_val - h;
    KinkTrace km;
    double lm = frozen_loss(bundle, probe, intr, plans, stage, target, landmarks, w, km);
    std::uint64_t fp_minus = plan_fingerprint(bundle, probe, intr, cfg.spp, seed);

    e.numeric = (lp - lm) / (2.0 * h);
    e.flagged = fp_plus != plans.fingerprint || fp_minus != plans.fingerprint ||
                kp != base_kinks || km != base_kinks;
    e.rel_err = std::fabs(e.analytic - e.numeric) /
                std::max({std::fabs(e.analytic), std::fabs(e.numeric), 1e-5});
    e.pass = e.rel_err < kGradCheckTol;
    if (e.flagged) {
      report.flagged += 1;
    } else {
      report.checked += 1;
      if (e.pass) report.passed += 1;
      report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
    }
    report.entries.push_back(e);
  }
  report.pass = report.checked > 0 && report.passed == report.checked;
  return report;
}

std::string gradcheck_json(const GradCheckReport& r) {
  std::ostringstream out;
  out.precision(12);
  out << "{\n  \"stage\": \"" << stage_name(r.stage) << "\",\n  \"checked\": " << r.checked
      << ",\n  \"passed\": " << r.passed << ",\n  \"flagged\": " << r.flagged
      << ",\n  \"max_rel_err\": " << r.max_rel_err << ",\n  \"pass\": "
      << (r.pass ? "true" : "false") << ",\n  \"entries\": [\n";
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const GradCheckEntry& e = r.entries[i];
    out << "    {\"block\": \"" << e.block << "\", \"index\": " << e.index
        << ", \"analytic\": " << e.analytic << ", \"numeric\": " << e.numeric
        << ", \"rel_err\": " << e.rel_err << ", \"flagged\": " << (e.flagged ? "true" : "false")
        << ", \"pass\": " << (e.pass ? "true" : "false") << "}" << (i + 1 < r.entries.size() ? "," : "")
        << "\n";
  }
  out << "  ]\n}\n";
  return out.str();
}

}  // namespace facefit
