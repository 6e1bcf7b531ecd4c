#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace tpdr {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

inline constexpr Mat3 kIdentity3{1, 0, 0, 0, 1, 0, 0, 0, 1};

// Global convention: R and t map world to camera space, camera looks down +z,
// camera center in world space is -R^T t.
struct Camera {
  Mat3 R{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 t{0, 0, 0};
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
};

// Orthonormality and det(R)=+1 within 1e-9, positive focal lengths,
// principal point inside the image.
void validate_camera(const Camera& cam);
Vec3 camera_center(const Camera& cam);

Camera camera_from_json(const std::string& text);
std::string camera_to_json(const Camera& cam);
Camera load_camera(const std::string& path);
void save_camera(const Camera& cam, const std::string& path);

// Projects a world point to pixel coordinates; z is the camera-space depth.
struct Projected {
  double x, y, z;
};
Projected project_point(const Camera& cam, const Vec3& p);

Mat3 mat3_mul(const Mat3& a, const Mat3& b);
Vec3 mat3_apply(const Mat3& m, const Vec3& v);
Mat3 mat3_transpose(const Mat3& m);
Mat3 rotation_y(double angle);  // right-handed rotation about +y
Mat3 rotation_x(double angle);  // right-handed rotation about +x

// Rigid transform q = R p + t on row-major [n,3] data.
void rigid_apply(const Mat3& R, const Vec3& t, std::vector<double>& points);
void rigid_invert(const Mat3& R, const Vec3& t, Mat3& R_inv, Vec3& t_inv);
void validate_rotation(const Mat3& R);

struct RayBatch {
  int height = 0, width = 0;
  std::vector<double> origins;     // [H*W*3]
  std::vector<double> directions;  // [H*W*3], unit norm
  double t_near = 0.0, t_far = 0.0;
};

RayBatch generate_rays(const Camera& cam, double t_near, double t_far);

struct PointBatch {
  int height = 0, width = 0, n_samples = 0;
  std::vector<double> positions;  // [(h,w,i,xyz)]
  std::vector<double> depths;     // [(h,w,i)], strictly increasing per ray

  // Channel layout expected by the convolutional deformation input:
  // channels (x1,y1,z1,x2,y2,z2,...) over the image grid.
  Tensor positions_chw() const;  // [3N, H, W]
  // Row layout used by point-wise field queries, ordered (h, w, i).
  Tensor positions_rows() const;  // [H*W*N, 3]
};

// One depth per stratified bin. With jitter the in-bin offset is uniform
// (seeded); without, bin midpoints, which golden-image tests rely on.
PointBatch stratified_sample(const RayBatch& rays, int n_samples, uint64_t seed, bool jitter);

// <sin(2^l pi q), cos(2^l pi q)> for l = 0..L-1, per input component.
std::vector<double> positional_encoding(const double* q, int dim, int n_freqs);

}  // namespace tpdr
