// Command-line front end: fixture generation, rendering, fitting, gradient
// checking, the renderer ablation, and metric reports.  All numeric settings
// live in a JSON config; flags select files, seed, sample count and mode.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "facefit/config.h"
#include "facefit/fit.h"
#include "facefit/fixture.h"
#include "facefit/gradcheck.h"
#include "facefit/metrics.h"
#include "facefit/ray_renderer.h"
#include "facefit/surface.h"

namespace {

using namespace facefit;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int spp = 0;
  bool deterministic = false;
  bool seed_set = false, spp_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& fl, bool out_required) {
  cmd->add_option("--config", fl.config_path, "JSON config file (defaults when omitted)");
  auto* out = cmd->add_option("--out", fl.out_dir, "output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", fl.seed, "override the config seed")->each([&](const std::string&) {
    fl.seed_set = true;
  });
  cmd->add_option("--spp", fl.spp, "override the config samples per pixel")
      ->each([&](const std::string&) { fl.spp_set = true; });
  cmd->add_flag("--deterministic", fl.deterministic, "force deterministic execution");
}

FitConfig resolve_config(const CommonFlags& fl) {
  FitConfig cfg = fl.config_path.empty() ? default_config() : load_config(fl.config_path);
  if (fl.seed_set) cfg.seed = fl.seed;
  if (fl.spp_set) cfg.spp = fl.spp;
  if (fl.deterministic) cfg.deterministic = true;
  return cfg;
}

void write_manifest(const std::string& out_dir, const std::string& command, const FitConfig& cfg,
                    const std::vector<std::string>& artifacts) {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["spp"] = cfg.spp;
  j["deterministic"] = cfg.deterministic;
  j["artifacts"] = artifacts;
  std::ofstream out(out_dir + "/run_manifest.json");
  if (!out) throw std::runtime_error("cli: cannot write run_manifest.json in " + out_dir);
  out << j.dump(2) << "\n";
}

Image mask_and(const Image& a, const Image& b) {
  Image m(a.width, a.height, 1);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      m.at(x, y, 0) = (a.at(x, y, 0) > 0.0f && b.at(x, y, 0) > 0.0f) ? 1.0f : 0.0f;
  return m;
}

int cmd_make_fixture(const CommonFlags& fl, const std::string& kind) {
  FitConfig cfg = resolve_config(fl);
  int spp = fl.spp_set ? fl.spp : 512;
  Fixture f = make_fixture(kind, cfg.seed, spp);
  save_fixture(fl.out_dir, f);
  save_config(fl.out_dir + "/config.json", cfg);
  write_manifest(fl.out_dir, "make-fixture", cfg,
                 {"bundle", "gt", "target.pfm", "target.png", "gt_normal.pfm", "gt_mask.pfm",
                  "landmarks.txt", "gt_mesh.obj", "fixture.json", "config.json"});
  std::cout << "fixture '" << kind << "' written to " << fl.out_dir << "\n";
  return 0;
}

int cmd_render(const CommonFlags& fl, const std::string& fixture_dir,
               const std::string& params_dir) {
  FitConfig cfg = resolve_config(fl);
  Fixture f = load_fixture(fixture_dir);
  SceneParams params = params_dir.empty() ? f.gt : load_params(params_dir, f.bundle);
  int spp = fl.spp_set ? fl.spp : cfg.artifact_spp;
  RenderOutput r = trace(f.bundle, params, f.intr, spp, cfg.seed);
  std::filesystem::create_directories(fl.out_dir);
  write_pfm(fl.out_dir + "/render.pfm", r.image);
  write_png(fl.out_dir + "/render.png", tonemap(r.image));
  write_pfm(fl.out_dir + "/normal.pfm", r.normal);
  write_pfm(fl.out_dir + "/mask.pfm", r.mask);
  write_manifest(fl.out_dir, "render", cfg,
                 {"render.pfm", "render.png", "normal.pfm", "mask.pfm"});
  std::cout << "rendered " << f.intr.width << "x" << f.intr.height << " at spp " << spp << " to "
            << fl.out_dir << "\n";
  return 0;
}

int cmd_fit(const CommonFlags& fl, const std::string& fixture_dir) {
  FitConfig cfg = resolve_config(fl);
  Fixture f = load_fixture(fixture_dir);
  SceneParams init = initialize_params(f.bundle, f.target, f.landmarks, cfg);
  FitResult res = fit(f.bundle, f.target, f.landmarks, init, cfg, fl.out_dir);
  write_manifest(fl.out_dir, "fit", cfg,
                 {"params.json", "medium_diffuse.pfm", "medium_specular.pfm", "fine_diffuse.pfm",
                  "fine_normal.pfm", "envmap.pfm", "mesh.obj", "fit_log.csv",
                  "render_coarse.pfm", "render_medium.pfm", "render_fine.pfm"});
  double last = res.traces[2].total.empty() ? res.traces[0].total.back()
                                            : res.traces[2].total.back();
  std::cout << "fit finished; final loss " << last << "; outputs in " << fl.out_dir << "\n";
  return 0;
}

int cmd_gradcheck(const CommonFlags& fl, const std::string& fixture_dir, const std::string& stage,
                  int coords) {
  FitConfig cfg = resolve_config(fl);
  Fixture f = load_fixture(fixture_dir);
  SceneParams at = perturb_params(f.bundle, f.gt, cfg.seed ^ 0x6e01, 1.0);
  std::vector<Stage> stages;
  if (stage == "all")
    stages = {Stage::kCoarse, Stage::kMedium, Stage::kFine};
  else if (stage == "coarse")
    stages = {Stage::kCoarse};
  else if (stage == "medium")
    stages = {Stage::kMedium};
  else if (stage == "fine")
    stages = {Stage::kFine};
  else
    throw std::runtime_error("cli: unknown stage '" + stage + "'");

  bool all_pass = true;
  std::string joined = "[\n";
  for (std::size_t i = 0; i < stages.size(); ++i) {
    GradCheckReport rep =
        gradcheck_stage(f.bundle, at, f.target, f.landmarks, stages[i], cfg, coords, cfg.seed);
    all_pass = all_pass && rep.pass;
    joined += gradcheck_json(rep);
    if (i + 1 < stages.size()) joined += ",\n";
    std::cout << stage_name(stages[i]) << ": " << rep.passed << "/" << rep.checked
              << " within tolerance, " << rep.flagged << " flagged, max rel err "
              << rep.max_rel_err << "\n";
  }
  joined += "]\n";
  if (!fl.out_dir.empty()) {
    std::filesystem::create_directories(fl.out_dir);
    std::ofstream out(fl.out_dir + "/gradcheck.json");
    out << joined;
    write_manifest(fl.out_dir, "gradcheck", cfg, {"gradcheck.json"});
  }
  return all_pass ? 0 : 1;
}

int cmd_ablation(const CommonFlags& fl, const std::string& fixture_dir, int seeds) {
  FitConfig cfg = resolve_config(fl);
  Fixture f = load_fixture(fixture_dir);
  SceneLift lift = lift_const_scene(f.gt);
  MeshValues gt_mesh = mesh_values(eval_geometry(f.bundle, lift));
  AblationReport rep = ablation_hybrid(f.bundle, f.target, f.landmarks, gt_mesh.vertices, cfg, seeds);
  std::string json = ablation_json(rep);
  if (!fl.out_dir.empty()) {
    std::filesystem::create_directories(fl.out_dir);
    std::ofstream out(fl.out_dir + "/ablation.json");
    out << json;
    write_manifest(fl.out_dir, "ablation", cfg, {"ablation.json"});
  }
  std::cout << "hybrid   mean " << rep.hybrid.mean << " (std " << rep.hybrid.stddev << ")\n"
            << "ray-only mean " << rep.ray_only.mean << " (std " << rep.ray_only.stddev << ")\n";
  return 0;
}

int cmd_metrics(const CommonFlags& fl, const std::string& fixture_dir,
                const std::string& params_dir) {
  FitConfig cfg = resolve_config(fl);
  Fixture f = load_fixture(fixture_dir);
  SceneParams fitted = load_params(params_dir, f.bundle);

  MeshValues gt_mesh = mesh_values(eval_geometry(f.bundle, lift_const_scene(f.gt)));
  MeshValues fit_mesh = mesh_values(eval_geometry(f.bundle, lift_const_scene(fitted)));
  MetricReport vertex = vertex_position_error(fit_mesh.vertices, gt_mesh.vertices);

  int spp = fl.spp_set ? fl.spp : cfg.artifact_spp;
  RenderOutput r = trace(f.bundle, fitted, f.intr, spp, cfg.seed);
  MetricReport angular = normal_angular_error(r.normal, f.gt_normal, mask_and(r.mask, f.gt_mask));
  double s = ssim(r.image, f.target);

  nlohmann::json j;
  j["vertex_position_error"] = nlohmann::json::parse(metric_json(vertex));
  j["normal_angular_error"] = nlohmann::json::parse(metric_json(angular));
  j["ssim"] = s;
  std::cout << "vertex position error: mean " << vertex.mean << " std " << vertex.stddev << "\n"
            << "normal angular error:  mean " << angular.mean << " deg; below 20/25/30: "
            << angular.pct20 << "% " << angular.pct25 << "% " << angular.pct30 << "%\n"
            << "ssim vs target:        " << s << "\n";
  if (!fl.out_dir.empty()) {
    std::filesystem::create_directories(fl.out_dir);
    std::ofstream out(fl.out_dir + "/metrics.json");
    out << j.dump(2) << "\n";
    write_manifest(fl.out_dir, "metrics", cfg, {"metrics.json"});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-image face reconstruction toolkit"};
  app.require_subcommand(1);

  CommonFlags fx, rd, ft, gc, ab, mt;
  std::string kind = "face", fixture_dir, params_dir, stage = "all";
  int coords = 64, seeds = 5;

  CLI::App* c_fx = app.add_subcommand("make-fixture", "generate a synthetic scene with known truth");
  c_fx->add_option("--kind", kind,
                   "face | face-blocker | face-shading | sphere-furnace | sphere-bridge");
  add_common(c_fx, fx, true);

  CLI::App* c_rd = app.add_subcommand("render", "ray-trace a fixture scene");
  c_rd->add_option("--fixture", fixture_dir, "fixture directory")->required();
  c_rd->add_option("--params", params_dir, "parameter directory (fixture truth when omitted)");
  add_common(c_rd, rd, true);

  CLI::App* c_ft = app.add_subcommand("fit", "reconstruct parameters from a fixture's image");
  c_ft->add_option("--fixture", fixture_dir, "fixture directory")->required();
  add_common(c_ft, ft, true);

  CLI::App* c_gc = app.add_subcommand("gradcheck", "compare tape gradients with finite differences");
  c_gc->add_option("--fixture", fixture_dir, "fixture directory")->required();
  c_gc->add_option("--stage", stage, "coarse | medium | fine | all");
  c_gc->add_option("--coords", coords, "sampled coordinates per stage");
  add_common(c_gc, gc, false);

  CLI::App* c_ab = app.add_subcommand("ablation", "hybrid loss vs ray-only loss comparison");
  c_ab->add_option("--fixture", fixture_dir, "fixture directory")->required();
  c_ab->add_option("--seeds", seeds, "number of jittered restarts");
  add_common(c_ab, ab, false);

  CLI::App* c_mt = app.add_subcommand("metrics", "score fitted parameters against fixture truth");
  c_mt->add_option("--fixture", fixture_dir, "fixture directory")->required();
  c_mt->add_option("--params", params_dir, "fitted parameter directory")->required();
  add_common(c_mt, mt, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (c_fx->parsed()) return cmd_make_fixture(fx, kind);
    if (c_rd->parsed()) return cmd_render(rd, fixture_dir, params_dir);
    if (c_ft->parsed()) return cmd_fit(ft, fixture_dir);
    if (c_gc->parsed()) return cmd_gradcheck(gc, fixture_dir, stage, coords);
    if (c_ab->parsed()) return cmd_ablation(ab, fixture_dir, seeds);
    if (c_mt->parsed()) return cmd_metrics(mt, fixture_dir, params_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
