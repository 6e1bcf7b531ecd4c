// Command-line front end. Talks to the engine exclusively through the C API;
// failures print one machine-readable JSON object on stderr and the process
// exits with the status code, so scripts can branch on the failure class.
#include <tpdr.h>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

int fail(tpdr_status status, const std::string& message) {
  const json err = {{"code", tpdr_status_name(status)}, {"message", message}};
  std::cerr << err.dump() << "\n";
  return static_cast<int>(status);
}

int finish(tpdr_status status) {
  return status == TPDR_OK ? 0 : fail(status, tpdr_last_error());
}

// Takes ownership of an engine-allocated string.
std::string take(char* s) {
  std::string out = s ? s : "";
  tpdr_free_string(s);
  return out;
}

bool slurp(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return false;
  out.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return true;
}

bool emit(const std::string& text, const std::string& out_path) {
  std::cout << text << "\n";
  if (out_path.empty()) return true;
  std::ofstream out(out_path, std::ios::binary);
  out << text << "\n";
  return out.good();
}

struct GenSceneArgs {
  std::string spec_path;
  std::string kind;
  std::string out_dir;
  uint64_t seed = 1;
  int resolution = 32;
  int samples_per_ray = 32;
};

int run_gen_scene(const GenSceneArgs& args, bool kind_given, bool seed_given, bool res_given,
                  bool samples_given) {
  GenSceneArgs a = args;
  if (!a.spec_path.empty()) {
    std::string text;
    if (!slurp(a.spec_path, text)) {
      return fail(TPDR_ERR_IO, "cannot open scene spec: " + a.spec_path);
    }
    json spec;
    try {
      spec = json::parse(text);
      if (!kind_given && spec.contains("kind")) a.kind = spec.at("kind").get<std::string>();
      if (!seed_given && spec.contains("seed")) a.seed = spec.at("seed").get<uint64_t>();
      if (!res_given && spec.contains("resolution")) a.resolution = spec.at("resolution").get<int>();
      if (!samples_given && spec.contains("samples_per_ray")) {
        a.samples_per_ray = spec.at("samples_per_ray").get<int>();
      }
    } catch (const json::exception& e) {
      return fail(TPDR_ERR_PARSE, "scene spec: " + std::string(e.what()));
    }
  }
  if (a.kind.empty()) {
    return fail(TPDR_ERR_INVALID_ARG, "scene kind required (--kind or spec file)");
  }
  return finish(tpdr_gen_scene(a.kind.c_str(), a.seed, a.resolution, a.samples_per_ray,
                               a.out_dir.c_str()));
}

struct TrainArgs {
  std::string scene_dir;
  std::string config_path;
  std::string ckpt_out;
  std::string log_out;
  uint64_t seed = 0;
  bool print_config = false;
};

int run_train(const TrainArgs& args, bool seed_given) {
  if (args.print_config) {
    char* text = nullptr;
    const tpdr_status st = tpdr_default_config(&text);
    if (st != TPDR_OK) return fail(st, tpdr_last_error());
    std::cout << take(text) << "\n";
    return 0;
  }
  if (args.scene_dir.empty() || args.ckpt_out.empty()) {
    return fail(TPDR_ERR_INVALID_ARG, "train needs a scene directory and --out checkpoint path");
  }
  std::string config_text = "{}";
  if (!args.config_path.empty() && !slurp(args.config_path, config_text)) {
    return fail(TPDR_ERR_IO, "cannot open config: " + args.config_path);
  }
  if (seed_given) {
    try {
      json cfg = json::parse(config_text);
      cfg["seed"] = args.seed;
      config_text = cfg.dump();
    } catch (const json::exception& e) {
      return fail(TPDR_ERR_PARSE, "config: " + std::string(e.what()));
    }
  }
  char* summary = nullptr;
  const tpdr_status st =
      tpdr_train(args.scene_dir.c_str(), config_text.c_str(), args.ckpt_out.c_str(),
                 args.log_out.empty() ? nullptr : args.log_out.c_str(), &summary);
  if (st != TPDR_OK) return fail(st, tpdr_last_error());
  std::cout << take(summary) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformable multi-scale radiance field toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", []() { return std::string(tpdr_version()); });

  GenSceneArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-scene", "Generate a synthetic scene directory");
  cmd_gen->add_option("spec", gen.spec_path, "Scene spec JSON (kind/seed/resolution/samples_per_ray)");
  CLI::Option* gen_kind = cmd_gen->add_option("--kind", gen.kind, "blob_field or textured_head");
  CLI::Option* gen_seed = cmd_gen->add_option("--seed", gen.seed, "Generation seed");
  CLI::Option* gen_res = cmd_gen->add_option("--resolution", gen.resolution, "Target image side");
  CLI::Option* gen_spr =
      cmd_gen->add_option("--samples-per-ray", gen.samples_per_ray, "Quadrature samples per ray");
  cmd_gen->add_option("--out", gen.out_dir, "Output directory")->required();

  TrainArgs train;
  CLI::App* cmd_train = app.add_subcommand("train", "Fit a model to a scene directory");
  cmd_train->add_option("scene_dir", train.scene_dir, "Scene directory from gen-scene");
  cmd_train->add_option("--config", train.config_path, "Training config JSON");
  CLI::Option* train_seed = cmd_train->add_option("--seed", train.seed, "Overrides the config seed");
  cmd_train->add_option("--out", train.ckpt_out, "Checkpoint output path");
  cmd_train->add_option("--log", train.log_out, "Per-step CSV log path");
  cmd_train->add_flag("--print-config", train.print_config,
                      "Print the full default config JSON and exit");

  std::string render_ckpt, render_camera, render_out;
  CLI::App* cmd_render = app.add_subcommand("render", "Render a checkpoint to a PPM image");
  cmd_render->add_option("ckpt", render_ckpt, "Checkpoint path")->required();
  cmd_render->add_option("--camera", render_camera, "Camera JSON (default: training camera)");
  cmd_render->add_option("--out", render_out, "Output PPM path")->required();

  std::string orbit_ckpt, orbit_out;
  double yaw_min = -30.0, yaw_max = 30.0;
  int orbit_steps = 5;
  CLI::App* cmd_orbit = app.add_subcommand("orbit", "Render a yaw sweep around the subject");
  cmd_orbit->add_option("ckpt", orbit_ckpt, "Checkpoint path")->required();
  cmd_orbit->add_option("--yaw-min", yaw_min, "Start yaw in degrees");
  cmd_orbit->add_option("--yaw-max", yaw_max, "End yaw in degrees");
  cmd_orbit->add_option("--steps", orbit_steps, "Number of frames");
  cmd_orbit->add_option("--out", orbit_out, "Output directory")->required();

  std::string secc_model, secc_coeffs, secc_out;
  int secc_resolution = 64;
  CLI::App* cmd_secc = app.add_subcommand("secc", "Rasterize head coefficients to a color-coded map");
  cmd_secc->add_option("model", secc_model, "Head model JSON")->required();
  cmd_secc->add_option("coeffs", secc_coeffs, "Coefficients JSON (z_shp/z_exp, optional R/t)")
      ->required();
  cmd_secc->add_option("--resolution", secc_resolution, "Output image side");
  cmd_secc->add_option("--out", secc_out, "Output PPM path")->required();

  std::string grad_component = "all", grad_out;
  uint64_t grad_seed = 0;
  CLI::App* cmd_grad = app.add_subcommand("gradcheck", "Compare analytic gradients to finite differences");
  cmd_grad->add_option("component", grad_component, "ops|planes|encoder|head|led|render|all");
  cmd_grad->add_option("--seed", grad_seed, "Initialization seed");
  cmd_grad->add_option("--out", grad_out, "Also write the report JSON here");

  std::string metrics_a, metrics_b, metrics_mask, metrics_out;
  CLI::App* cmd_metrics = app.add_subcommand("metrics", "Compare two images");
  cmd_metrics->add_option("a", metrics_a, "First PPM")->required();
  cmd_metrics->add_option("b", metrics_b, "Second PPM")->required();
  cmd_metrics->add_option("--mask", metrics_mask, "Alpha PGM; pixels above half are scored");
  cmd_metrics->add_option("--out", metrics_out, "Also write the report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(TPDR_ERR_INVALID_ARG, e.what());
  }

  if (cmd_gen->parsed()) {
    return run_gen_scene(gen, gen_kind->count() > 0, gen_seed->count() > 0, gen_res->count() > 0,
                         gen_spr->count() > 0);
  }
  if (cmd_train->parsed()) return run_train(train, train_seed->count() > 0);
  if (cmd_render->parsed()) {
    return finish(tpdr_render(render_ckpt.c_str(),
                              render_camera.empty() ? nullptr : render_camera.c_str(),
                              render_out.c_str()));
  }
  if (cmd_orbit->parsed()) {
    return finish(tpdr_orbit(orbit_ckpt.c_str(), yaw_min, yaw_max, orbit_steps, orbit_out.c_str()));
  }
  if (cmd_secc->parsed()) {
    return finish(tpdr_secc(secc_model.c_str(), secc_coeffs.c_str(), secc_resolution,
                            secc_out.c_str()));
  }
  if (cmd_grad->parsed()) {
    char* text = nullptr;
    const tpdr_status st = tpdr_gradcheck(grad_component.c_str(), grad_seed, &text);
    if (st != TPDR_OK) return fail(st, tpdr_last_error());
    const std::string report = take(text);
    if (!emit(report, grad_out)) return fail(TPDR_ERR_IO, "cannot write report: " + grad_out);
    bool pass = false;
    try {
      pass = json::parse(report).at("pass").get<bool>();
    } catch (const json::exception& e) {
      return fail(TPDR_ERR_INTERNAL, e.what());
    }
    if (!pass) return fail(TPDR_ERR_NUMERIC, "gradient check exceeded tolerance");
    return 0;
  }
  if (cmd_metrics->parsed()) {
    char* text = nullptr;
    const tpdr_status st = tpdr_metrics(metrics_a.c_str(), metrics_b.c_str(),
                                        metrics_mask.empty() ? nullptr : metrics_mask.c_str(),
                                        &text);
    if (st != TPDR_OK) return fail(st, tpdr_last_error());
    const std::string report = take(text);
    if (!emit(report, metrics_out)) return fail(TPDR_ERR_IO, "cannot write report: " + metrics_out);
    return 0;
  }
  return fail(TPDR_ERR_INVALID_ARG, "no subcommand");
}
