#include "facefit/config.h"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace facefit {

using nlohmann::json;

FitConfig default_config() { return FitConfig{}; }

namespace {

json to_json(const FitConfig& c) {
  json w = {
      {"w_lm", c.weights.w_lm},
      {"w_dr", c.weights.w_dr},
      {"medium_w_symmetry", c.weights.med_w_s},
      {"medium_w_consistency_diffuse", c.weights.med_w_c_diff},
      {"medium_w_consistency_specular", c.weights.med_w_c_spec},
      {"medium_w_smoothness", c.weights.med_w_m},
      {"medium_w_box", c.weights.med_w_b},
      {"fine_w_symmetry", c.weights.fine_w_s},
      {"fine_w_consistency", c.weights.fine_w_c},
      {"fine_w_smoothness", c.weights.fine_w_m},
      {"fine_w_box", c.weights.fine_w_b},
      {"halving_factor", c.weights.halving_factor},
      {"round_iters", c.weights.round_iters},
  };
  return json{
      {"weights", w},
      {"coarse_iters", c.coarse_iters},
      {"medium_iters", c.medium_iters},
      {"fine_iters", c.fine_iters},
      {"lr_coeffs", c.lr_coeffs},
      {"lr_maps", c.lr_maps},
      {"co_refine_scale", c.co_refine_scale},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"spp", c.spp},
      {"artifact_spp", c.artifact_spp},
      {"seed", c.seed},
      {"roughness", c.roughness},
      {"focal", c.focal},
      {"deterministic", c.deterministic},
  };
}

void check_keys(const json& j, const std::set<std::string>& allowed, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::runtime_error(std::string("config: unknown key '") + it.key() + "' in " + where);
}

}  // namespace

std::string config_json(const FitConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

FitConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: parse failure: ") + e.what());
  }
  check_keys(j, {"weights", "coarse_iters", "medium_iters", "fine_iters", "lr_coeffs", "lr_maps",
                 "co_refine_scale", "adam_beta1", "adam_beta2", "adam_eps", "spp", "artifact_spp",
                 "seed", "roughness", "focal", "deterministic"},
             "config");
  FitConfig c;
  json w = j.value("weights", json::object());
  check_keys(w,
             {"w_lm", "w_dr", "medium_w_symmetry", "medium_w_consistency_diffuse",
              "medium_w_consistency_specular", "medium_w_smoothness", "medium_w_box",
              "fine_w_symmetry", "fine_w_consistency", "fine_w_smoothness", "fine_w_box",
              "halving_factor", "round_iters"},
             "weights");
  c.weights.w_lm = w.value("w_lm", c.weights.w_lm);
  c.weights.w_dr = w.value("w_dr", c.weights.w_dr);
  c.weights.med_w_s = w.value("medium_w_symmetry", c.weights.med_w_s);
  c.weights.med_w_c_diff = w.value("medium_w_consistency_diffuse", c.weights.med_w_c_diff);
  c.weights.med_w_c_spec = w.value("medium_w_consistency_specular", c.weights.med_w_c_spec);
  c.weights.med_w_m = w.value("medium_w_smoothness", c.weights.med_w_m);
  c.weights.med_w_b = w.value("medium_w_box", c.weights.med_w_b);
  c.weights.fine_w_s = w.value("fine_w_symmetry", c.weights.fine_w_s);
  c.weights.fine_w_c = w.value("fine_w_consistency", c.weights.fine_w_c);
  c.weights.fine_w_m = w.value("fine_w_smoothness", c.weights.fine_w_m);
  c.weights.fine_w_b = w.value("fine_w_box", c.weights.fine_w_b);
  c.weights.halving_factor = w.value("halving_factor", c.weights.halving_factor);
  c.weights.round_iters = w.value("round_iters", c.weights.round_iters);
  c.coarse_iters = j.value("coarse_iters", c.coarse_iters);
  c.medium_iters = j.value("medium_iters", c.medium_iters);
  c.fine_iters = j.value("fine_iters", c.fine_iters);
  c.lr_coeffs = j.value("lr_coeffs", c.lr_coeffs);
  c.lr_maps = j.value("lr_maps", c.lr_maps);
  c.co_refine_scale = j.value("co_refine_scale", c.co_refine_scale);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.spp = j.value("spp", c.spp);
  c.artifact_spp = j.value("artifact_spp", c.artifact_spp);
  c.seed = j.value("seed", c.seed);
  c.roughness = j.value("roughness", c.roughness);
  c.focal = j.value("focal", c.focal);
  c.deterministic = j.value("deterministic", c.deterministic);
  if (c.spp < 1 || c.artifact_spp < 1) throw std::runtime_error("config: spp must be >= 1");
  if (c.coarse_iters < 0 || c.medium_iters < 0 || c.fine_iters < 0)
    throw std::runtime_error("config: iteration counts must be >= 0");
  return c;
}

FitConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::string& path, const FitConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << config_json(cfg);
}

std::uint64_t config_hash(const FitConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : config_json(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace facefit
