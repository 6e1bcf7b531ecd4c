#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace tpdr {

// Parametric head mesh. Vertices are produced as
//   v = R * (template + shape_basis . z_shp + expr_basis . z_exp) + t
// with bases stored flat: shape_basis[(k*V + v)*3 + a].
struct MorphableModel {
  int64_t n_vertices = 0;
  int64_t n_shape = 0;
  int64_t n_expr = 0;
  std::vector<double> base;         // [V,3] template mesh
  std::vector<double> shape_basis;  // [Ks,V,3], zero mean over vertices per component
  std::vector<double> expr_basis;   // [Ke,V,3], zero mean over vertices per component
  std::vector<int64_t> triangles;   // [T,3] vertex indices
  std::vector<double> ncc;          // [V,3] normalized template coordinates in [0,1]

  int64_t n_triangles() const { return static_cast<int64_t>(triangles.size()) / 3; }
  void validate() const;
};

struct FaceCoefficients {
  std::vector<double> z_shp;
  std::vector<double> z_exp;
  Mat3 R = kIdentity3;
  Vec3 t = {0.0, 0.0, 0.0};
};

// Exact affine evaluation; errors on coefficient/basis length mismatch.
std::vector<double> compute_vertices(const MorphableModel& model, const FaceCoefficients& coeffs);

// z_exp = 0, R = I, t = 0; shape coefficients kept. Idempotent.
FaceCoefficients neutralize(const FaceCoefficients& coeffs);

// Procedural head: ellipsoid with nose/mouth/eye bumps, lat-long topology.
// Expression basis vector 0 is supported only on mouth-region vertices and is
// zero-mean by a weighted-centering construction; remaining basis vectors are
// smooth random bump fields, centered per component.
MorphableModel make_toy_head(uint64_t seed = 42, int n_shape = 8, int n_expr = 8);

// Vertices where expression basis vector k has nonzero displacement.
std::vector<int64_t> expr_support_vertices(const MorphableModel& model, int64_t k);

// JSON with base64-encoded little-endian arrays (f64 data, u32 triangles).
std::string model_to_json(const MorphableModel& model);
MorphableModel model_from_json(const std::string& text);
void save_model(const std::string& path, const MorphableModel& model);
MorphableModel load_model(const std::string& path);

}  // namespace tpdr
