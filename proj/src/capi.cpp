#include "tpdr.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "gradcheck.hpp"
#include "image_io.hpp"
#include "json.hpp"
#include "metrics.hpp"
#include "morphable.hpp"
#include "rasterizer.hpp"
#include "renderer.hpp"
#include "scene.hpp"
#include "tensor.hpp"
#include "training.hpp"

struct tpdr_checkpoint {
  tpdr::Checkpoint raw;
  tpdr::Session session;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
tpdr_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return TPDR_OK;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return TPDR_ERR_INVALID_ARG;
  } catch (const tpdr::IoError& e) {
    g_last_error = e.what();
    return TPDR_ERR_IO;
  } catch (const tpdr::ParseError& e) {
    g_last_error = e.what();
    return TPDR_ERR_PARSE;
  } catch (const tpdr::NumericError& e) {
    g_last_error = e.what();
    return TPDR_ERR_NUMERIC;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return TPDR_ERR_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TPDR_ERR_INTERNAL;
  }
}

void require_arg(const void* p, const char* name) {
  if (!p) throw std::invalid_argument(std::string(name) + " must not be null");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tpdr::IoError("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

// Infinities have no JSON literal; mirror the metric report's "inf" string.
nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::json json_numbers(const std::vector<double>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (double x : v) arr.push_back(json_number(x));
  return arr;
}

std::string checkpoint_meta_text(const tpdr::Checkpoint& raw) {
  const tpdr::Tensor* t = raw.find("meta.json");
  if (!t) return {};
  std::string text(static_cast<size_t>(t->numel()), '\0');
  for (int64_t i = 0; i < t->numel(); ++i) {
    text[static_cast<size_t>(i)] = static_cast<char>(t->data()[i]);
  }
  return text;
}

void render_to_ppm(const tpdr_checkpoint& ckpt, const char* camera_json_path,
                   const std::string& out_ppm) {
  const tpdr::Camera cam =
      camera_json_path ? tpdr::load_camera(camera_json_path) : ckpt.session.base_camera;
  tpdr::NoGradGuard guard;
  const tpdr::RenderResult rr = tpdr::render_image(ckpt.session.rscene, cam, ckpt.session.opts);
  tpdr::write_ppm(out_ppm, rr.rgb_image(), rr.width, rr.height);
}

std::unique_ptr<tpdr_checkpoint> load_handle(const std::string& path) {
  auto handle = std::make_unique<tpdr_checkpoint>();
  handle->raw = tpdr::load_checkpoint(path);
  handle->session = tpdr::session_from_checkpoint(handle->raw);
  return handle;
}

}  // namespace

extern "C" {

const char* tpdr_version(void) { return "0.1.0"; }

const char* tpdr_status_name(tpdr_status status) {
  switch (status) {
    case TPDR_OK: return "ok";
    case TPDR_ERR_INVALID_ARG: return "invalid_arg";
    case TPDR_ERR_IO: return "io";
    case TPDR_ERR_PARSE: return "parse";
    case TPDR_ERR_NUMERIC: return "numeric";
    case TPDR_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* tpdr_last_error(void) { return g_last_error.c_str(); }

void tpdr_free_string(char* s) { std::free(s); }

tpdr_status tpdr_default_config(char** json_out) {
  return guarded([&] {
    require_arg(json_out, "json_out");
    *json_out = dup_string(tpdr::config_to_json(tpdr::TrainConfig{}));
  });
}

tpdr_status tpdr_gen_scene(const char* kind, uint64_t seed, int resolution, int samples_per_ray,
                           const char* out_dir) {
  return guarded([&] {
    require_arg(kind, "kind");
    require_arg(out_dir, "out_dir");
    if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
    if (samples_per_ray < 2) throw std::invalid_argument("samples_per_ray must be at least 2");
    const tpdr::Scene scene = tpdr::generate_scene(kind, seed, resolution, samples_per_ray);
    tpdr::save_scene(scene, out_dir);
  });
}

tpdr_status tpdr_train(const char* scene_dir, const char* config_json, const char* ckpt_out,
                       const char* log_csv_out, char** summary_json_out) {
  return guarded([&] {
    require_arg(scene_dir, "scene_dir");
    require_arg(ckpt_out, "ckpt_out");
    const tpdr::Scene scene = tpdr::load_scene(scene_dir);
    const tpdr::TrainConfig cfg =
        config_json ? tpdr::config_from_json(config_json) : tpdr::TrainConfig{};
    const tpdr::TrainResult result = tpdr::train_overfit(scene, cfg);
    tpdr::save_checkpoint(result.checkpoint, ckpt_out);
    if (log_csv_out) tpdr::write_log_csv(result.log, log_csv_out);
    if (summary_json_out) {
      const nlohmann::json summary = {
          {"steps", result.log.size()},
          {"final_psnr", json_number(result.final_psnr)},
          {"per_target_psnr", json_numbers(result.per_target_psnr)},
          {"per_target_delta_l1", json_numbers(result.per_target_delta_l1)},
          {"checkpoint", ckpt_out}};
      *summary_json_out = dup_string(summary.dump(2));
    }
  });
}

tpdr_status tpdr_checkpoint_load(const char* path, tpdr_checkpoint** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = load_handle(path).release();
  });
}

void tpdr_checkpoint_free(tpdr_checkpoint* ckpt) { delete ckpt; }

tpdr_status tpdr_checkpoint_info(const tpdr_checkpoint* ckpt, char** json_out) {
  return guarded([&] {
    require_arg(ckpt, "ckpt");
    require_arg(json_out, "json_out");
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [name, tensor] : ckpt->raw.entries) {
      entries.push_back({{"name", name}, {"shape", tensor.shape()}});
    }
    nlohmann::json info = {{"entries", entries}};
    const std::string meta = checkpoint_meta_text(ckpt->raw);
    info["meta"] = meta.empty() ? nlohmann::json() : nlohmann::json::parse(meta);
    *json_out = dup_string(info.dump(2));
  });
}

tpdr_status tpdr_checkpoint_render(const tpdr_checkpoint* ckpt, const char* camera_json_path,
                                   const char* out_ppm) {
  return guarded([&] {
    require_arg(ckpt, "ckpt");
    require_arg(out_ppm, "out_ppm");
    render_to_ppm(*ckpt, camera_json_path, out_ppm);
  });
}

tpdr_status tpdr_render(const char* ckpt_path, const char* camera_json_path, const char* out_ppm) {
  return guarded([&] {
    require_arg(ckpt_path, "ckpt_path");
    require_arg(out_ppm, "out_ppm");
    render_to_ppm(*load_handle(ckpt_path), camera_json_path, out_ppm);
  });
}

tpdr_status tpdr_orbit(const char* ckpt_path, double yaw_min_deg, double yaw_max_deg, int steps,
                       const char* out_dir) {
  return guarded([&] {
    require_arg(ckpt_path, "ckpt_path");
    require_arg(out_dir, "out_dir");
    if (steps < 1) throw std::invalid_argument("steps must be at least 1");
    const std::unique_ptr<tpdr_checkpoint> handle = load_handle(ckpt_path);

    std::vector<double> yaw_deg(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i) {
      yaw_deg[static_cast<size_t>(i)] =
          steps == 1 ? 0.5 * (yaw_min_deg + yaw_max_deg)
                     : yaw_min_deg + i * (yaw_max_deg - yaw_min_deg) / (steps - 1);
    }
    std::vector<double> yaw_rad;
    constexpr double kDegree = 3.14159265358979323846 / 180.0;
    for (double d : yaw_deg) yaw_rad.push_back(d * kDegree);

    tpdr::NoGradGuard guard;
    const tpdr::OrbitResult orbit = tpdr::orbit_render(
        handle->session.rscene, handle->session.base_camera, yaw_rad, {}, handle->session.opts);

    std::filesystem::create_directories(out_dir);
    nlohmann::json frames = nlohmann::json::array();
    for (size_t i = 0; i < orbit.frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%03zu.ppm", i);
      const tpdr::RenderResult& rr = orbit.frames[i];
      tpdr::write_ppm((std::filesystem::path(out_dir) / name).string(), rr.rgb_image(), rr.width,
                      rr.height);
      frames.push_back({{"file", name},
                        {"yaw_deg", yaw_deg[i]},
                        {"camera", nlohmann::json::parse(tpdr::camera_to_json(orbit.cameras[i]))}});
    }
    const nlohmann::json manifest = {{"frames", frames}};
    std::ofstream out(std::filesystem::path(out_dir) / "manifest.json", std::ios::binary);
    if (!out) throw tpdr::IoError(std::string("cannot open for writing: ") + out_dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw tpdr::IoError(std::string("write failed in: ") + out_dir);
  });
}

tpdr_status tpdr_secc(const char* model_path, const char* coeffs_json_path, int resolution,
                      const char* out_ppm) {
  return guarded([&] {
    require_arg(model_path, "model_path");
    require_arg(coeffs_json_path, "coeffs_json_path");
    require_arg(out_ppm, "out_ppm");
    if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
    const tpdr::MorphableModel model = tpdr::load_model(model_path);

    tpdr::FaceCoefficients coeffs;
    try {
      const nlohmann::json j = nlohmann::json::parse(read_text_file(coeffs_json_path));
      coeffs.z_shp = j.at("z_shp").get<std::vector<double>>();
      coeffs.z_exp = j.at("z_exp").get<std::vector<double>>();
      if (j.contains("R")) {
        const auto r = j.at("R").get<std::vector<double>>();
        if (r.size() != 9) throw tpdr::ParseError("coeffs json: R must have 9 entries");
        std::copy(r.begin(), r.end(), coeffs.R.begin());
      }
      if (j.contains("t")) {
        const auto t = j.at("t").get<std::vector<double>>();
        if (t.size() != 3) throw tpdr::ParseError("coeffs json: t must have 3 entries");
        std::copy(t.begin(), t.end(), coeffs.t.begin());
      }
    } catch (const nlohmann::json::exception& e) {
      throw tpdr::ParseError(std::string("coeffs json: ") + e.what());
    }

    const tpdr::SECCImage img =
        tpdr::render_secc(model, coeffs, tpdr::frontal_camera(resolution));
    tpdr::write_ppm(out_ppm, img.rgb, img.width, img.height);
  });
}

tpdr_status tpdr_gradcheck(const char* component, uint64_t seed, char** report_json_out) {
  return guarded([&] {
    require_arg(component, "component");
    require_arg(report_json_out, "report_json_out");
    const std::vector<tpdr::GradcheckEntry> entries = tpdr::run_gradcheck(component, seed);
    *report_json_out = dup_string(tpdr::gradcheck_report_json(entries));
  });
}

tpdr_status tpdr_metrics(const char* a_ppm, const char* b_ppm, const char* mask_pgm,
                         char** report_json_out) {
  return guarded([&] {
    require_arg(a_ppm, "a_ppm");
    require_arg(b_ppm, "b_ppm");
    require_arg(report_json_out, "report_json_out");
    int wa = 0, ha = 0, wb = 0, hb = 0;
    const std::vector<double> a = tpdr::read_ppm(a_ppm, wa, ha);
    const std::vector<double> b = tpdr::read_ppm(b_ppm, wb, hb);
    if (wa != wb || ha != hb) {
      throw std::invalid_argument("images differ in size: " + std::to_string(wa) + "x" +
                                  std::to_string(ha) + " vs " + std::to_string(wb) + "x" +
                                  std::to_string(hb));
    }
    std::vector<uint8_t> mask;
    if (mask_pgm) {
      int wm = 0, hm = 0;
      const std::vector<double> m = tpdr::read_pgm(mask_pgm, wm, hm);
      if (wm != wa || hm != ha) throw std::invalid_argument("mask size does not match the images");
      mask = tpdr::mask_from_alpha(m);
    } else {
      mask.assign(static_cast<size_t>(wa) * ha, 1);
    }
    tpdr::MetricReport report;
    report.psnr_masked = tpdr::psnr_masked(a, b, mask, 3);
    report.ssim = tpdr::ssim(tpdr::to_grayscale(a), tpdr::to_grayscale(b), wa, ha);
    *report_json_out = dup_string(tpdr::metric_report_json(report));
  });
}

}  // extern "C"
