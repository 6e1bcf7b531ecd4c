#include "scene.hpp"
#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "image_io.hpp"
#include "json.hpp"
#include "rasterizer.hpp"

namespace tpdr {

Camera frontal_camera(int res) {
  Camera cam;
  cam.fx = cam.fy = 1.1 * res;
  cam.cx = cam.cy = res / 2.0;
  cam.width = cam.height = res;
  cam.t = {0.0, 0.0, 2.5};
  return cam;
}

namespace {

using nlohmann::json;

constexpr double kBlobAmp = 6.0;
constexpr double kBlobRadius = 0.35;

// Pose the frontal camera on a circle of the same radius about the origin.
Camera yawed_camera(const Camera& base, double yaw) {
  Camera cam = base;
  cam.R = mat3_mul(base.R, rotation_y(yaw));
  return cam;
}

SceneTarget render_blob_target(const Camera& cam, int n_samples, double t_near, double t_far) {
  const RayBatch rays = generate_rays(cam, t_near, t_far);
  const PointBatch points = stratified_sample(rays, n_samples, 0, false);
  SceneTarget target;
  target.camera = cam;
  const int n_rays = cam.width * cam.height;
  target.rgb.assign(static_cast<size_t>(n_rays) * 3, 0.0);
  target.alpha.assign(n_rays, 0.0);
  for (int r = 0; r < n_rays; ++r) {
    double trans = 1.0;
    for (int i = 0; i < n_samples; ++i) {
      const size_t at = (static_cast<size_t>(r) * n_samples + i) * 3;
      const Vec3 p = {points.positions[at], points.positions[at + 1], points.positions[at + 2]};
      double rgb[3], sigma;
      blob_field_at(p, rgb, sigma);
      const double cur = points.depths[static_cast<size_t>(r) * n_samples + i];
      const double next =
          (i + 1 < n_samples) ? points.depths[static_cast<size_t>(r) * n_samples + i + 1] : t_far;
      const double alpha = 1.0 - std::exp(-sigma * (next - cur));
      for (int c = 0; c < 3; ++c) target.rgb[static_cast<size_t>(r) * 3 + c] += trans * alpha * rgb[c];
      trans *= 1.0 - alpha;
    }
    target.alpha[r] = 1.0 - trans;
  }
  target.mask.resize(n_rays);
  for (int r = 0; r < n_rays; ++r) target.mask[r] = target.alpha[r] > 0.5 ? 1 : 0;
  return target;
}

SceneTarget raster_target(const MorphableModel& model, const std::vector<double>& z_shp,
                          const std::vector<double>& z_exp, const Camera& cam) {
  const SECCImage img = render_secc(model, {z_shp, z_exp, kIdentity3, {0.0, 0.0, 0.0}}, cam);
  SceneTarget target;
  target.camera = cam;
  target.rgb = img.rgb;
  target.z_exp = z_exp;
  const size_t n = img.mask.size();
  target.alpha.resize(n);
  target.mask = img.mask;
  for (size_t i = 0; i < n; ++i) target.alpha[i] = img.mask[i] ? 1.0 : 0.0;
  return target;
}

json scene_manifest(const Scene& scene) {
  json m;
  m["kind"] = scene.kind;
  m["seed"] = scene.seed;
  m["resolution"] = scene.resolution;
  m["n_samples"] = scene.n_samples;
  m["t_near"] = scene.t_near;
  m["t_far"] = scene.t_far;
  json cams = json::array();
  for (size_t i = 0; i < scene.cameras.size(); ++i) {
    cams.push_back("camera_" + std::to_string(i) + ".json");
  }
  m["cameras"] = cams;
  json targets = json::array();
  for (size_t i = 0; i < scene.targets.size(); ++i) {
    json t;
    t["rgb"] = "target_" + std::to_string(i) + ".ppm";
    t["alpha"] = "target_" + std::to_string(i) + "_alpha.pgm";
    t["camera"] = "target_camera_" + std::to_string(i) + ".json";
    t["z_exp"] = scene.targets[i].z_exp;
    targets.push_back(t);
  }
  m["targets"] = targets;
  if (scene.has_model()) {
    m["model"] = "model.json";
    m["z_shp"] = scene.z_shp;
    m["secc_camera"] = "camera_secc.json";
  }
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

void Scene::validate() const {
  if (kind != "blob_field" && kind != "textured_head") {
    throw std::invalid_argument("scene: unknown kind '" + kind + "'");
  }
  if (resolution < 4) throw std::invalid_argument("scene: resolution too small");
  if (n_samples < 2) throw std::invalid_argument("scene: n_samples must be >= 2");
  if (!(t_near > 0.0 && t_far > t_near)) throw std::invalid_argument("scene: bad depth range");
  if (targets.empty()) throw std::invalid_argument("scene: no targets");
  for (const SceneTarget& t : targets) {
    const size_t n = static_cast<size_t>(t.camera.width) * t.camera.height;
    if (t.rgb.size() != n * 3 || t.alpha.size() != n || t.mask.size() != n) {
      throw std::invalid_argument("scene: target buffers do not match camera size");
    }
  }
  if (kind == "textured_head") {
    if (!has_model()) throw std::invalid_argument("scene: textured_head requires a model");
    model.validate();
    if (static_cast<int64_t>(z_shp.size()) != model.n_shape) {
      throw std::invalid_argument("scene: z_shp length mismatch");
    }
    for (const SceneTarget& t : targets) {
      if (static_cast<int64_t>(t.z_exp.size()) != model.n_expr) {
        throw std::invalid_argument("scene: target z_exp length mismatch");
      }
    }
    validate_camera(secc_camera);
  }
}

void blob_field_at(const Vec3& p, double rgb[3], double& sigma) {
  const double r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
  sigma = kBlobAmp * std::exp(-r2 / (2.0 * kBlobRadius * kBlobRadius));
  for (int c = 0; c < 3; ++c) rgb[c] = std::clamp((p[c] + 1.0) * 0.5, 0.0, 1.0);
}

Scene generate_scene(const std::string& kind, uint64_t seed, int resolution, int n_samples) {
  Scene scene;
  scene.kind = kind;
  scene.seed = seed;
  scene.resolution = resolution;
  scene.n_samples = n_samples;
  const Camera base = frontal_camera(resolution);
  if (kind == "blob_field") {
    scene.cameras = {base};
    scene.targets.push_back(render_blob_target(base, n_samples, scene.t_near, scene.t_far));
  } else if (kind == "textured_head") {
    scene.model = make_toy_head(seed);
    scene.z_shp.assign(scene.model.n_shape, 0.0);
    scene.cameras = {base, yawed_camera(base, 15.0 * 3.14159265358979323846 / 180.0)};
    scene.secc_camera = frontal_camera(std::max(resolution, 32));
    std::vector<double> neutral(scene.model.n_expr, 0.0);
    std::vector<double> mouth_open(scene.model.n_expr, 0.0);
    mouth_open[0] = 1.0;
    scene.targets.push_back(raster_target(scene.model, scene.z_shp, neutral, base));
    scene.targets.push_back(raster_target(scene.model, scene.z_shp, mouth_open, base));
  } else {
    throw std::invalid_argument("generate_scene: unknown kind '" + kind + "'");
  }
  scene.validate();
  return scene;
}

void save_scene(const Scene& scene, const std::string& dir) {
  scene.validate();
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  for (size_t i = 0; i < scene.cameras.size(); ++i) {
    write_text(root / ("camera_" + std::to_string(i) + ".json"), camera_to_json(scene.cameras[i]));
  }
  for (size_t i = 0; i < scene.targets.size(); ++i) {
    const SceneTarget& t = scene.targets[i];
    write_ppm((root / ("target_" + std::to_string(i) + ".ppm")).string(), t.rgb, t.camera.width,
              t.camera.height);
    write_pgm((root / ("target_" + std::to_string(i) + "_alpha.pgm")).string(), t.alpha,
              t.camera.width, t.camera.height);
    write_text(root / ("target_camera_" + std::to_string(i) + ".json"),
               camera_to_json(t.camera));
  }
  if (scene.has_model()) {
    save_model((root / "model.json").string(), scene.model);
    write_text(root / "camera_secc.json", camera_to_json(scene.secc_camera));
  }
  write_text(root / "manifest.json", scene_manifest(scene).dump(2) + "\n");
}

Scene load_scene(const std::string& dir) {
  const std::filesystem::path root(dir);
  json m;
  try {
    m = json::parse(read_text(root / "manifest.json"));
  } catch (const json::exception& e) {
    throw ParseError("scene manifest parse error: " + std::string(e.what()));
  }
  Scene scene;
  try {
    scene.kind = m.at("kind").get<std::string>();
    scene.seed = m.at("seed").get<uint64_t>();
    scene.resolution = m.at("resolution").get<int>();
    scene.n_samples = m.at("n_samples").get<int>();
    scene.t_near = m.at("t_near").get<double>();
    scene.t_far = m.at("t_far").get<double>();
    for (const json& name : m.at("cameras")) {
      scene.cameras.push_back(camera_from_json(read_text(root / name.get<std::string>())));
    }
    for (const json& jt : m.at("targets")) {
      SceneTarget t;
      t.camera = camera_from_json(read_text(root / jt.at("camera").get<std::string>()));
      int w = 0, h = 0;
      t.rgb = read_ppm((root / jt.at("rgb").get<std::string>()).string(), w, h);
      if (w != t.camera.width || h != t.camera.height) {
        throw ParseError("scene: target image size does not match its camera");
      }
      t.alpha = read_pgm((root / jt.at("alpha").get<std::string>()).string(), w, h);
      if (w != t.camera.width || h != t.camera.height) {
        throw ParseError("scene: alpha image size does not match its camera");
      }
      t.z_exp = jt.at("z_exp").get<std::vector<double>>();
      t.mask.resize(t.alpha.size());
      for (size_t i = 0; i < t.alpha.size(); ++i) t.mask[i] = t.alpha[i] > 0.5 ? 1 : 0;
      scene.targets.push_back(std::move(t));
    }
    if (m.contains("model")) {
      scene.model = load_model((root / m.at("model").get<std::string>()).string());
      scene.z_shp = m.at("z_shp").get<std::vector<double>>();
      scene.secc_camera =
          camera_from_json(read_text(root / m.at("secc_camera").get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ParseError("scene manifest field error: " + std::string(e.what()));
  }
  scene.validate();
  return scene;
}

PixelBox mouth_bbox(const MorphableModel& model, const std::vector<double>& z_shp,
                    const std::vector<double>& z_exp, const Camera& cam, int margin) {
  const std::vector<int64_t> core = expr_support_vertices(model, 0);
  if (core.empty()) throw std::invalid_argument("mouth_bbox: empty expression support");
  // Close over incident triangles: every triangle touching the support moves
  // with the expression, so its full extent belongs to the region.
  std::vector<uint8_t> in_support(static_cast<size_t>(model.n_vertices), 0);
  for (const int64_t v : core) in_support[static_cast<size_t>(v)] = 1;
  std::vector<uint8_t> in_region = in_support;
  for (int64_t t = 0; t < model.n_triangles(); ++t) {
    const int64_t* tri = &model.triangles[static_cast<size_t>(t) * 3];
    if (in_support[tri[0]] || in_support[tri[1]] || in_support[tri[2]]) {
      in_region[tri[0]] = in_region[tri[1]] = in_region[tri[2]] = 1;
    }
  }
  std::vector<int64_t> support;
  for (int64_t v = 0; v < model.n_vertices; ++v) {
    if (in_region[static_cast<size_t>(v)]) support.push_back(v);
  }
  PixelBox box;
  box.x0 = cam.width;
  box.y0 = cam.height;
  box.x1 = -1;
  box.y1 = -1;
  const std::vector<double> zero_exp(model.n_expr, 0.0);
  for (const std::vector<double>* exp : {&zero_exp, &z_exp}) {
    const std::vector<double> verts =
        compute_vertices(model, {z_shp, *exp, kIdentity3, {0.0, 0.0, 0.0}});
    for (const int64_t v : support) {
      const Vec3 p = {verts[v * 3], verts[v * 3 + 1], verts[v * 3 + 2]};
      const Projected q = project_point(cam, p);
      if (q.z <= 1e-9) continue;
      box.x0 = std::min(box.x0, static_cast<int>(std::floor(q.x)));
      box.x1 = std::max(box.x1, static_cast<int>(std::ceil(q.x)));
      box.y0 = std::min(box.y0, static_cast<int>(std::floor(q.y)));
      box.y1 = std::max(box.y1, static_cast<int>(std::ceil(q.y)));
    }
  }
  if (box.empty()) throw std::invalid_argument("mouth_bbox: support projects outside the frustum");
  box.x0 = std::max(0, box.x0 - margin);
  box.y0 = std::max(0, box.y0 - margin);
  box.x1 = std::min(cam.width - 1, box.x1 + margin);
  box.y1 = std::min(cam.height - 1, box.y1 + margin);
  return box;
}

}  // namespace tpdr
