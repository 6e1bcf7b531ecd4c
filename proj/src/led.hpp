#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "tensor.hpp"

namespace tpdr {

struct Checkpoint;

struct ConvLayer {
  Tensor w;  // [Cout, Cin, k, k]
  Tensor b;  // [Cout]
};

// Expression-conditioned point deformation: a shallow fully-convolutional
// expression encoder over the 6-channel SECC pair, a position encoder over
// the 3N-channel reshaped sample points, and a decoder mapping the channel
// concatenation of both latents to per-point offsets in world units.
struct LedParams {
  std::vector<ConvLayer> expr;  // input 6 channels
  std::vector<ConvLayer> pos;   // input 3N channels
  std::vector<ConvLayer> dec;   // output 3N channels, linear last layer
  int n_samples = 0;
  double leak = 0.2;

  std::vector<std::pair<std::string, Tensor>> parameters() const;
  void validate() const;
};

// All stacks use 3x3 stride-1 convolutions with unit padding, so spatial size
// is preserved and the decoder output matches the rendering H x W.
LedParams make_led(int n_samples, int channels, int expr_layers, int pos_layers, int dec_layers,
                   uint64_t seed);

Tensor encode_expression(const LedParams& params, const Tensor& secc_pair);  // [6,H,W]
Tensor encode_positions(const LedParams& params, const PointBatch& points);
// Latents share spatial size; output shape {H, W, N, 3}.
Tensor predict_deformation(const LedParams& params, const Tensor& expr_latent,
                           const Tensor& pos_latent);

// Gaussian position noise for the deformation input only; depths unchanged.
PointBatch perturb_points(const PointBatch& points, double sigma, uint64_t seed);

// Sum of |delta| over all entries, differentiable.
Tensor deformation_l1(const Tensor& delta);

struct DeformationBatch {
  Tensor delta;           // {H, W, N, 3}
  PointBatch p_original;  // the undisturbed points
  Tensor deformed_rows;   // {H*W*N, 3} = original rows + delta
};

// Runs the full deformation path. When sigma_perturb > 0 the encoders see
// perturbed points, but the offsets are added to the original points.
DeformationBatch apply_deformation(const LedParams& params, const PointBatch& p_original,
                                   const Tensor& secc_pair, double sigma_perturb,
                                   uint64_t perturb_seed);

void put_led(Checkpoint& ckpt, const LedParams& params);
LedParams led_from_checkpoint(const Checkpoint& ckpt);

}  // namespace tpdr
