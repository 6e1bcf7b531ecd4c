#pragma once

#include <vector>

#include "geometry.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace tpdr {

// Three orthogonal feature planes spanning the world cube [-extent, extent]^3.
// A plane stores [C, Rres, Rres]; for the pair (a, b) of world axes feeding a
// plane, a indexes columns and b indexes rows.
struct TriPlaneLevel {
  Tensor xy, xz, yz;
  double extent = 1.0;

  int64_t channels() const { return xy.dim(0); }
  int64_t res() const { return xy.dim(1); }
  void validate() const;
};

struct MultiScaleTriPlane {
  std::vector<TriPlaneLevel> levels;

  int64_t total_channels() const;
  void validate() const;  // nonempty, per-level valid, strictly increasing res
};

TriPlaneLevel make_level(Rng& rng, int64_t channels, int64_t res, double extent, double init_scale);

// Queries [M,3] world points against one level: project to (x,y), (x,z),
// (y,z), bilinear-sample each plane with border clamp, average the three.
// Differentiable in both the planes and the points. Returns [M, C].
Tensor sample_level(const TriPlaneLevel& level, const Tensor& points);

// Per-level samples concatenated in level order. Returns [M, sum C_j].
Tensor sample_multiscale(const MultiScaleTriPlane& ms, const Tensor& points);

// Rigid change of frame for a level defined in the source camera frame:
// querying the result at p equals querying the input at R p + t. Each output
// plane node is the input plane sampled at the image of that node's surface
// point (z=0 for xy, y=0 for xz, x=0 for yz) under the rigid map. Exact for
// axis-aligned rotations and grid-aligned translations; bilinear resampling
// error otherwise. Differentiable in the plane values.
TriPlaneLevel camera_to_world_planes(const TriPlaneLevel& level, const Mat3& R, const Vec3& t);

// Tiny strided conv stack producing per-level feature maps from a source
// image, plus per-level decoders emitting the three planes (as one 3C-channel
// stack, split [xy | xz | yz]).
struct PyramidEncoder {
  Tensor stem_w, stem_b;            // [Cm, Cin, 3, 3] at the finest resolution
  std::vector<Tensor> down_w;       // stride-2 [Cm, Cm, 3, 3], finest to coarsest
  std::vector<Tensor> down_b;
  std::vector<Tensor> psi_w;        // psi_w[0]: [3C, Cm, 3, 3]; later: [3C, Cm + 3C, 3, 3]
  std::vector<Tensor> psi_b;
  double leak = 0.2;

  int64_t n_levels() const { return static_cast<int64_t>(psi_w.size()); }
  std::vector<Tensor> parameters() const;
};

PyramidEncoder make_pyramid_encoder(Rng& rng, int64_t in_channels, int64_t mid_channels,
                                    int64_t plane_channels, int64_t n_levels, double init_scale);

// Coarse-to-fine pyramid: level 0 is decoded from the coarsest features; each
// finer level is decoded from [features, upsampled previous planes] so detail
// accumulates on top of the coarse field. Every level is then re-expressed in
// the world frame for the given source pose. The source image must be square
// with side = coarsest_res * 2^(n_levels-1).
MultiScaleTriPlane build_pyramid_encoder_mode(const PyramidEncoder& enc, const Tensor& source_image,
                                              int64_t coarsest_res, double extent, const Mat3& R_src,
                                              const Vec3& t_src);

// Serialization names: "level{j}.plane{xy|xz|yz}".
struct Checkpoint;
void put_planes(Checkpoint& ckpt, const MultiScaleTriPlane& ms);
MultiScaleTriPlane planes_from_checkpoint(const Checkpoint& ckpt, double extent);

}  // namespace tpdr
