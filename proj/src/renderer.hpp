#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "led.hpp"
#include "tensor.hpp"
#include "triplane.hpp"

namespace tpdr {

struct Checkpoint;

// Two dense layers: leaky hidden, then sigmoid rgb (columns 0-2) and
// softplus density (column 3), so sigma >= 0 and rgb in (0,1) always.
struct RadianceHead {
  Tensor w1, b1;  // [in, hidden], [hidden]
  Tensor w2, b2;  // [hidden, 4], [4]
  double leak = 0.2;

  int64_t in_dim() const { return w1.dim(0); }
  std::vector<std::pair<std::string, Tensor>> parameters() const;
  void validate() const;
};

RadianceHead make_radiance_head(int64_t in_dim, int64_t hidden, uint64_t seed);

// features [R, C], gamma [R, G] with C+G = head input; returns (rgb [R,3],
// sigma [R,1]). gamma may be undefined when the head takes features alone.
std::pair<Tensor, Tensor> query_radiance(const RadianceHead& head, const Tensor& features,
                                         const Tensor& gamma);

// Discrete quadrature over each ray's samples: delta_i = t_{i+1} - t_i with
// the last delta reaching t_far, alpha_i = 1 - exp(-sigma_i delta_i),
// T_i = prod_{j<i} (1 - alpha_j), pixel = sum T_i alpha_i rgb_i over black,
// alpha_out = 1 - T_end. rgb_sigma is [R*N, 4] in ray-major order; depths has
// one strictly increasing run of N entries per ray, each below t_far.
Tensor composite_rays(const Tensor& rgb_sigma, const std::vector<double>& depths, double t_far,
                      int n_samples);

// Single-ray convenience over the same op: rgb [N,3], sigma [N] -> [4].
Tensor integrate_ray(const Tensor& rgb, const Tensor& sigma, const std::vector<double>& depths,
                     double t_far);

struct RenderOptions {
  int n_samples = 32;
  double t_near = 0.0, t_far = 0.0;
  int posenc_freqs = 4;  // 6*freqs extra head inputs; 0 disables the encoding
  bool jitter = false;
  uint64_t seed = 0;
  double sigma_perturb = 0.0;  // deformation input noise, training only
  uint64_t perturb_seed = 0;
};

// Scene parameters for rendering: multi-scale planes, radiance head, and the
// optional deformation path driven by a SECC pair (resized to the render
// resolution when needed).
struct RenderScene {
  MultiScaleTriPlane planes;
  RadianceHead head;
  bool use_led = false;
  LedParams led;
  Tensor secc_pair;  // [6, Hs, Ws], required when use_led
};

struct RenderResult {
  int width = 0, height = 0;
  Tensor rgb_alpha;  // [n_rays, 4], differentiable
  Tensor delta;      // {H, W, N, 3} when the deformation path ran; else undefined
  std::vector<int64_t> ray_ids;

  std::vector<double> rgb_image() const;    // [H*W*3], zeros for unrendered rays
  std::vector<double> alpha_image() const;  // [H*W]
};

// Renders the listed rays (indices h*W + w). The deformation path always runs
// on the full H x W grid (its encoders are convolutional); plane sampling and
// the head run only on the requested rays.
RenderResult render_rays(const RenderScene& scene, const Camera& cam, const RenderOptions& opts,
                         const std::vector<int64_t>& ray_ids);

RenderResult render_image(const RenderScene& scene, const Camera& cam, const RenderOptions& opts);

// Camera orbited about the world origin (the head center).
Camera orbit_camera(const Camera& base, double yaw, double pitch);

struct OrbitResult {
  std::vector<RenderResult> frames;
  std::vector<Camera> cameras;
};

// One frame per yaw; pitch_list must be empty (all zero) or match yaw_list.
OrbitResult orbit_render(const RenderScene& scene, const Camera& base,
                         const std::vector<double>& yaw_list,
                         const std::vector<double>& pitch_list, const RenderOptions& opts);

void put_head(Checkpoint& ckpt, const RadianceHead& head);
RadianceHead head_from_checkpoint(const Checkpoint& ckpt);

}  // namespace tpdr
