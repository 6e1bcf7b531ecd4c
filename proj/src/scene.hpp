#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "morphable.hpp"

namespace tpdr {

// One training target: a camera, its reference image, and the expression
// coefficients that produced it (empty for non-face scenes).
struct SceneTarget {
  Camera camera;
  std::vector<double> rgb;    // [H*W*3]
  std::vector<double> alpha;  // [H*W]
  std::vector<uint8_t> mask;  // alpha > 0.5
  std::vector<double> z_exp;
};

// A reproducible synthetic scene. kind "blob_field" is a smooth analytic
// density; kind "textured_head" is the parametric head rasterized under two
// expressions, for deformation training.
struct Scene {
  std::string kind;
  uint64_t seed = 0;
  int resolution = 32;
  int n_samples = 32;
  double t_near = 1.5;
  double t_far = 3.5;
  std::vector<Camera> cameras;
  std::vector<SceneTarget> targets;
  MorphableModel model;  // textured_head only
  std::vector<double> z_shp;
  Camera secc_camera;  // rasterization camera for coordinate-code pairs

  bool has_model() const { return model.n_vertices > 0; }
  void validate() const;
};

// The analytic field behind blob_field: an isotropic Gaussian density bump at
// the origin with position-coded color.
void blob_field_at(const Vec3& p, double rgb[3], double& sigma);

// Identity-pose camera at (0,0,2.5) looking down -z with fx = fy = 1.1*res and
// a centered principal point; the pose every generated scene starts from.
Camera frontal_camera(int res);

Scene generate_scene(const std::string& kind, uint64_t seed, int resolution, int n_samples);

// Directory layout: manifest.json, camera_{i}.json, target_{i}.ppm,
// target_{i}_alpha.pgm, and for head scenes model.json + camera_secc.json.
void save_scene(const Scene& scene, const std::string& dir);
Scene load_scene(const std::string& dir);

// Inclusive pixel bounds (clamped to the camera frame) around the mouth
// expression region, projected under both the neutral and the deformed
// expression so motion stays inside the box.
struct PixelBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  bool empty() const { return x1 < x0 || y1 < y0; }
};

PixelBox mouth_bbox(const MorphableModel& model, const std::vector<double>& z_shp,
                    const std::vector<double>& z_exp, const Camera& cam, int margin);

}  // namespace tpdr
