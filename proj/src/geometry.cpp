#include "geometry.hpp"
#include "errors.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "rng.hpp"

namespace tpdr {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void validate_rotation(const Mat3& R) {
  // R R^T = I
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += R[i * 3 + k] * R[j * 3 + k];
      const double expect = i == j ? 1.0 : 0.0;
      if (std::abs(dot - expect) > 1e-9) {
        throw std::invalid_argument("rotation matrix is not orthonormal");
      }
    }
  }
  const double det = R[0] * (R[4] * R[8] - R[5] * R[7]) - R[1] * (R[3] * R[8] - R[5] * R[6]) +
                     R[2] * (R[3] * R[7] - R[4] * R[6]);
  if (std::abs(det - 1.0) > 1e-9) {
    throw std::invalid_argument("rotation matrix determinant is not +1");
  }
}

void validate_camera(const Camera& cam) {
  validate_rotation(cam.R);
  if (cam.fx <= 0.0 || cam.fy <= 0.0) throw std::invalid_argument("camera: focal lengths must be positive");
  if (cam.width <= 0 || cam.height <= 0) throw std::invalid_argument("camera: image size must be positive");
  if (cam.cx < 0.0 || cam.cx >= cam.width || cam.cy < 0.0 || cam.cy >= cam.height) {
    throw std::invalid_argument("camera: principal point outside the image");
  }
}

Vec3 camera_center(const Camera& cam) {
  const Mat3 Rt = mat3_transpose(cam.R);
  Vec3 c = mat3_apply(Rt, cam.t);
  return {-c[0], -c[1], -c[2]};
}

Camera camera_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("camera json: ") + e.what());
  }
  Camera cam;
  try {
    const auto& r = j.at("R");
    const auto& t = j.at("t");
    if (r.size() != 9 || t.size() != 3) throw ParseError("camera json: R must have 9 entries, t must have 3");
    for (int i = 0; i < 9; ++i) cam.R[i] = r.at(i).get<double>();
    for (int i = 0; i < 3; ++i) cam.t[i] = t.at(i).get<double>();
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("camera json: ") + e.what());
  }
  validate_camera(cam);
  return cam;
}

std::string camera_to_json(const Camera& cam) {
  nlohmann::json j;
  j["R"] = cam.R;
  j["t"] = cam.t;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j.dump(2) + "\n";
}

Camera load_camera(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("camera: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return camera_from_json(text);
}

void save_camera(const Camera& cam, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("camera: cannot open " + path + " for writing");
  out << camera_to_json(cam);
}

Projected project_point(const Camera& cam, const Vec3& p) {
  Vec3 q = mat3_apply(cam.R, p);
  for (int i = 0; i < 3; ++i) q[i] += cam.t[i];
  return {cam.fx * q[0] / q[2] + cam.cx, cam.fy * q[1] / q[2] + cam.cy, q[2]};
}

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a[i * 3 + k] * b[k * 3 + j];
      out[i * 3 + j] = acc;
    }
  return out;
}

Vec3 mat3_apply(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 mat3_transpose(const Mat3& m) { return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}; }

Mat3 rotation_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c, 0, s, 0, 1, 0, -s, 0, c};
}

Mat3 rotation_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {1, 0, 0, 0, c, -s, 0, s, c};
}

void rigid_apply(const Mat3& R, const Vec3& t, std::vector<double>& points) {
  validate_rotation(R);
  if (points.size() % 3 != 0) throw std::invalid_argument("rigid_apply: point array length not divisible by 3");
  for (size_t i = 0; i + 2 < points.size(); i += 3) {
    const Vec3 p{points[i], points[i + 1], points[i + 2]};
    const Vec3 q = mat3_apply(R, p);
    points[i] = q[0] + t[0];
    points[i + 1] = q[1] + t[1];
    points[i + 2] = q[2] + t[2];
  }
}

void rigid_invert(const Mat3& R, const Vec3& t, Mat3& R_inv, Vec3& t_inv) {
  validate_rotation(R);
  R_inv = mat3_transpose(R);
  const Vec3 rt = mat3_apply(R_inv, t);
  t_inv = {-rt[0], -rt[1], -rt[2]};
}

RayBatch generate_rays(const Camera& cam, double t_near, double t_far) {
  validate_camera(cam);
  if (!(t_near > 0.0 && t_near < t_far)) {
    throw std::invalid_argument("generate_rays: need 0 < t_near < t_far");
  }
  RayBatch rays;
  rays.height = cam.height;
  rays.width = cam.width;
  rays.t_near = t_near;
  rays.t_far = t_far;
  rays.origins.resize(static_cast<size_t>(cam.height) * cam.width * 3);
  rays.directions.resize(rays.origins.size());

  const Vec3 center = camera_center(cam);
  const Mat3 Rt = mat3_transpose(cam.R);
  for (int h = 0; h < cam.height; ++h) {
    for (int w = 0; w < cam.width; ++w) {
      // Pixel-center ray in camera space, +z forward.
      const Vec3 d_cam{(w + 0.5 - cam.cx) / cam.fx, (h + 0.5 - cam.cy) / cam.fy, 1.0};
      Vec3 d = mat3_apply(Rt, d_cam);
      const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      const size_t base = (static_cast<size_t>(h) * cam.width + w) * 3;
      for (int a = 0; a < 3; ++a) {
        rays.origins[base + a] = center[a];
        rays.directions[base + a] = d[a] / norm;
      }
    }
  }
  return rays;
}

PointBatch stratified_sample(const RayBatch& rays, int n_samples, uint64_t seed, bool jitter) {
  if (n_samples < 2) throw std::invalid_argument("stratified_sample: need at least 2 samples per ray");
  PointBatch pts;
  pts.height = rays.height;
  pts.width = rays.width;
  pts.n_samples = n_samples;
  const size_t n_rays = static_cast<size_t>(rays.height) * rays.width;
  pts.depths.resize(n_rays * n_samples);
  pts.positions.resize(n_rays * n_samples * 3);

  Rng rng(seed);
  const double span = rays.t_far - rays.t_near;
  for (size_t r = 0; r < n_rays; ++r) {
    const double* o = rays.origins.data() + r * 3;
    const double* d = rays.directions.data() + r * 3;
    for (int i = 0; i < n_samples; ++i) {
      const double u = jitter ? rng.uniform() : 0.5;
      const double depth = rays.t_near + span * (i + u) / n_samples;
      pts.depths[r * n_samples + i] = depth;
      double* p = pts.positions.data() + (r * n_samples + i) * 3;
      for (int a = 0; a < 3; ++a) p[a] = o[a] + depth * d[a];
    }
  }
  return pts;
}

Tensor PointBatch::positions_chw() const {
  const int64_t hw = static_cast<int64_t>(height) * width;
  std::vector<double> out(static_cast<size_t>(3 * n_samples) * hw);
  for (int64_t r = 0; r < hw; ++r)
    for (int i = 0; i < n_samples; ++i)
      for (int a = 0; a < 3; ++a)
        out[static_cast<size_t>((3 * i + a) * hw + r)] = positions[static_cast<size_t>((r * n_samples + i) * 3 + a)];
  return Tensor::from_data({3 * n_samples, height, width}, std::move(out));
}

Tensor PointBatch::positions_rows() const {
  return Tensor::from_data({static_cast<int64_t>(height) * width * n_samples, 3}, positions);
}

std::vector<double> positional_encoding(const double* q, int dim, int n_freqs) {
  if (n_freqs < 1) throw std::invalid_argument("positional_encoding: need at least one frequency");
  std::vector<double> out(static_cast<size_t>(dim) * 2 * n_freqs);
  size_t k = 0;
  for (int c = 0; c < dim; ++c) {
    double scaled = kPi * q[c];
    for (int l = 0; l < n_freqs; ++l) {
      out[k++] = std::sin(scaled);
      out[k++] = std::cos(scaled);
      scaled *= 2.0;
    }
  }
  return out;
}

}  // namespace tpdr
