#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <tpdr.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Takes ownership of the C string.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  tpdr_free_string(s);
  return out;
}

const char* kNanoConfig =
    R"({"steps": 6, "batch_rays": 16, "plane_res": [8], "plane_channels": 2,
        "head_hidden": 8, "posenc_freqs": 2, "led_channels": 2, "led_layers": 1})";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(tpdr_version()) > 0);
  CHECK(std::string(tpdr_status_name(TPDR_OK)) == "ok");
  CHECK(std::string(tpdr_status_name(TPDR_ERR_IO)) == "io");
  CHECK(std::string(tpdr_status_name(TPDR_ERR_PARSE)) == "parse");
}

TEST_CASE("default config is a full JSON object") {
  char* text = nullptr;
  REQUIRE(tpdr_default_config(&text) == TPDR_OK);
  const nlohmann::json j = nlohmann::json::parse(take(text));
  CHECK(j.contains("lr"));
  CHECK(j.contains("steps"));
  CHECK(j.contains("lambda_R"));
  CHECK(j.contains("sigma_perturb"));
}

TEST_CASE("gen_scene: determinism, manifest contents, and argument errors") {
  const fs::path a = fresh_dir("capi_scene_a");
  const fs::path b = fresh_dir("capi_scene_b");
  REQUIRE(tpdr_gen_scene("blob_field", 1, 8, 4, a.string().c_str()) == TPDR_OK);
  REQUIRE(tpdr_gen_scene("blob_field", 1, 8, 4, b.string().c_str()) == TPDR_OK);
  for (const auto& entry : fs::directory_iterator(a)) {
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
  }

  const fs::path head = fresh_dir("capi_scene_head");
  REQUIRE(tpdr_gen_scene("textured_head", 42, 10, 3, head.string().c_str()) == TPDR_OK);
  const nlohmann::json manifest = nlohmann::json::parse(slurp(head / "manifest.json"));
  CHECK(manifest["cameras"].size() >= 2);

  CHECK(tpdr_gen_scene("florp", 1, 8, 4, a.string().c_str()) == TPDR_ERR_INVALID_ARG);
  CHECK(std::strlen(tpdr_last_error()) > 0);
  CHECK(tpdr_gen_scene("blob_field", 1, 0, 4, a.string().c_str()) == TPDR_ERR_INVALID_ARG);
  CHECK(tpdr_gen_scene(nullptr, 1, 8, 4, a.string().c_str()) == TPDR_ERR_INVALID_ARG);
}

TEST_CASE("train, render, and checkpoint round trip through the C surface") {
  const fs::path dir = fresh_dir("capi_train");
  const fs::path scene_dir = dir / "scene";
  REQUIRE(tpdr_gen_scene("textured_head", 42, 10, 3, scene_dir.string().c_str()) == TPDR_OK);

  const fs::path ckpt = dir / "model.ckpt";
  const fs::path log = dir / "log.csv";
  char* summary_text = nullptr;
  REQUIRE(tpdr_train(scene_dir.string().c_str(), kNanoConfig, ckpt.string().c_str(),
                     log.string().c_str(), &summary_text) == TPDR_OK);
  const nlohmann::json summary = nlohmann::json::parse(take(summary_text));
  CHECK(summary["steps"].get<int>() == 6);
  CHECK(summary["per_target_psnr"].size() == 2);
  CHECK(summary["per_target_delta_l1"].size() == 2);
  const std::string log_text = slurp(log);
  CHECK(log_text.rfind("step,loss,psnr\n", 0) == 0);

  const fs::path direct = dir / "direct.ppm";
  REQUIRE(tpdr_render(ckpt.string().c_str(), nullptr, direct.string().c_str()) == TPDR_OK);

  tpdr_checkpoint* handle = nullptr;
  REQUIRE(tpdr_checkpoint_load(ckpt.string().c_str(), &handle) == TPDR_OK);
  char* info_text = nullptr;
  REQUIRE(tpdr_checkpoint_info(handle, &info_text) == TPDR_OK);
  const nlohmann::json info = nlohmann::json::parse(take(info_text));
  CHECK(info["entries"].size() > 0);
  CHECK(info["meta"].contains("render"));
  CHECK(info["meta"].contains("base_camera"));

  const fs::path via_handle = dir / "via_handle.ppm";
  REQUIRE(tpdr_checkpoint_render(handle, nullptr, via_handle.string().c_str()) == TPDR_OK);
  tpdr_checkpoint_free(handle);
  CHECK(slurp(direct) == slurp(via_handle));

  // Rendering under an explicit camera file matches the stored base camera.
  const fs::path cam_path = dir / "camera.json";
  {
    std::ofstream out(cam_path);
    out << info["meta"]["base_camera"].dump();
  }
  const fs::path via_camera = dir / "via_camera.ppm";
  REQUIRE(tpdr_render(ckpt.string().c_str(), cam_path.string().c_str(),
                      via_camera.string().c_str()) == TPDR_OK);
  CHECK(slurp(direct) == slurp(via_camera));
}

TEST_CASE("train error paths carry distinct codes") {
  const fs::path dir = fresh_dir("capi_train_err");
  const fs::path ckpt = dir / "model.ckpt";
  CHECK(tpdr_train((dir / "missing").string().c_str(), nullptr, ckpt.string().c_str(), nullptr,
                   nullptr) == TPDR_ERR_IO);

  const fs::path scene_dir = dir / "scene";
  REQUIRE(tpdr_gen_scene("blob_field", 1, 8, 4, scene_dir.string().c_str()) == TPDR_OK);
  CHECK(tpdr_train(scene_dir.string().c_str(), "{not json", ckpt.string().c_str(), nullptr,
                   nullptr) == TPDR_ERR_PARSE);
  CHECK(tpdr_train(scene_dir.string().c_str(), R"({"florp": 1})", ckpt.string().c_str(), nullptr,
                   nullptr) == TPDR_ERR_PARSE);
  CHECK(tpdr_train(scene_dir.string().c_str(), R"({"steps": 0})", ckpt.string().c_str(), nullptr,
                   nullptr) == TPDR_ERR_INVALID_ARG);
  CHECK(tpdr_checkpoint_load((dir / "missing.ckpt").string().c_str(), nullptr) ==
        TPDR_ERR_INVALID_ARG);  // null out param
  tpdr_checkpoint* handle = nullptr;
  CHECK(tpdr_checkpoint_load((dir / "missing.ckpt").string().c_str(), &handle) == TPDR_ERR_IO);
}

TEST_CASE("orbit writes frames plus a pose manifest") {
  const fs::path dir = fresh_dir("capi_orbit");
  const fs::path scene_dir = dir / "scene";
  REQUIRE(tpdr_gen_scene("blob_field", 1, 8, 4, scene_dir.string().c_str()) == TPDR_OK);
  const fs::path ckpt = dir / "model.ckpt";
  REQUIRE(tpdr_train(scene_dir.string().c_str(), kNanoConfig, ckpt.string().c_str(), nullptr,
                     nullptr) == TPDR_OK);

  const fs::path frames = dir / "frames";
  REQUIRE(tpdr_orbit(ckpt.string().c_str(), -30.0, 30.0, 5, frames.string().c_str()) == TPDR_OK);
  int ppm_count = 0;
  for (const auto& entry : fs::directory_iterator(frames)) {
    if (entry.path().extension() == ".ppm") ++ppm_count;
  }
  CHECK(ppm_count == 5);
  const nlohmann::json manifest = nlohmann::json::parse(slurp(frames / "manifest.json"));
  REQUIRE(manifest["frames"].size() == 5);
  CHECK(manifest["frames"][0]["yaw_deg"].get<double>() == -30.0);
  CHECK(manifest["frames"][2]["yaw_deg"].get<double>() == 0.0);
  CHECK(manifest["frames"][4]["yaw_deg"].get<double>() == 30.0);
  CHECK(manifest["frames"][0]["camera"].contains("R"));

  CHECK(tpdr_orbit(ckpt.string().c_str(), -30.0, 30.0, 0, frames.string().c_str()) ==
        TPDR_ERR_INVALID_ARG);
}

TEST_CASE("secc rasterizes a coefficients file against the scene model") {
  const fs::path dir = fresh_dir("capi_secc");
  const fs::path scene_dir = dir / "scene";
  REQUIRE(tpdr_gen_scene("textured_head", 42, 10, 3, scene_dir.string().c_str()) == TPDR_OK);
  const fs::path model = scene_dir / "model.json";
  REQUIRE(fs::exists(model));

  const fs::path coeffs = dir / "coeffs.json";
  {
    std::ofstream out(coeffs);
    out << R"({"z_shp": [0,0,0,0,0,0,0,0], "z_exp": [1,0,0,0,0,0,0,0]})";
  }
  const fs::path out_ppm = dir / "secc.ppm";
  REQUIRE(tpdr_secc(model.string().c_str(), coeffs.string().c_str(), 32,
                    out_ppm.string().c_str()) == TPDR_OK);
  const std::string ppm = slurp(out_ppm);
  CHECK(ppm.rfind("P6\n", 0) == 0);
  CHECK(ppm.size() > 32u * 32u);

  const fs::path bad = dir / "bad.json";
  {
    std::ofstream out(bad);
    out << R"({"z_shp": [0]})";
  }
  CHECK(tpdr_secc(model.string().c_str(), bad.string().c_str(), 32, out_ppm.string().c_str()) ==
        TPDR_ERR_PARSE);
  CHECK(tpdr_secc((dir / "no_model.json").string().c_str(), coeffs.string().c_str(), 32,
                  out_ppm.string().c_str()) == TPDR_ERR_IO);
}

TEST_CASE("gradcheck reports through the C surface") {
  char* text = nullptr;
  REQUIRE(tpdr_gradcheck("head", 0, &text) == TPDR_OK);
  const nlohmann::json report = nlohmann::json::parse(take(text));
  CHECK(report["pass"].get<bool>());
  CHECK(report["components"].contains("head"));
  CHECK(tpdr_gradcheck("florp", 0, &text) == TPDR_ERR_INVALID_ARG);
}

TEST_CASE("metrics: identical images give the sentinel values") {
  const fs::path dir = fresh_dir("capi_metrics");
  const fs::path scene_dir = dir / "scene";
  REQUIRE(tpdr_gen_scene("blob_field", 1, 16, 4, scene_dir.string().c_str()) == TPDR_OK);
  const fs::path img = scene_dir / "target_0.ppm";
  const fs::path alpha = scene_dir / "target_0_alpha.pgm";

  char* text = nullptr;
  REQUIRE(tpdr_metrics(img.string().c_str(), img.string().c_str(), nullptr, &text) == TPDR_OK);
  nlohmann::json report = nlohmann::json::parse(take(text));
  CHECK(report["psnr_masked"] == "inf");
  CHECK(report["ssim"].get<double>() == 1.0);

  REQUIRE(tpdr_metrics(img.string().c_str(), img.string().c_str(), alpha.string().c_str(),
                       &text) == TPDR_OK);
  report = nlohmann::json::parse(take(text));
  CHECK(report["psnr_masked"] == "inf");

  CHECK(tpdr_metrics(img.string().c_str(), (dir / "nope.ppm").string().c_str(), nullptr, &text) ==
        TPDR_ERR_IO);
  CHECK(std::string(tpdr_last_error()).find("nope.ppm") != std::string::npos);
}
