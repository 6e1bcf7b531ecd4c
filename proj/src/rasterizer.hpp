#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "morphable.hpp"
#include "tensor.hpp"

namespace tpdr {

// Rasterized face with normalized-coordinate colors. rgb is row-major
// interleaved and zero outside the mask; depth is camera-space z, +inf where
// the mask is false.
struct SECCImage {
  int width = 0, height = 0;
  std::vector<double> rgb;    // [H*W*3]
  std::vector<uint8_t> mask;  // [H*W], 0 or 1
  std::vector<double> depth;  // [H*W]
};

// Z-buffer rasterization with pixel-center coverage and the top-left fill
// rule; depth test is strict less-than on camera-space z, ties keep the lower
// triangle index. Attribute interpolation is affine (documented toy-scale
// simplification). Errors if the camera is degenerate or no triangle lands in
// front of the camera inside the image.
SECCImage render_secc(const MorphableModel& model, const FaceCoefficients& coeffs,
                      const Camera& cam);

// Driving/canonical pair, both rendered with R=I, t=0 so pose never enters;
// the canonical image uses zero expression.
std::pair<SECCImage, SECCImage> make_secc_pair(const MorphableModel& model,
                                               const std::vector<double>& z_shp_src,
                                               const std::vector<double>& z_exp_dri,
                                               const Camera& cam_frontal);

// Planar [6,H,W] tensor: channels 0-2 driving rgb, 3-5 canonical rgb.
Tensor secc_pair_tensor(const SECCImage& dri, const SECCImage& can);

// PPM (P6) color image plus PGM (P5) mask.
void save_secc(const SECCImage& image, const std::string& ppm_path, const std::string& pgm_path);

}  // namespace tpdr
