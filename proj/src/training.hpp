#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "renderer.hpp"
#include "scene.hpp"

namespace tpdr {

// Optimization settings plus the model-size knobs needed to build a fresh
// field. The photometric-refinement and adversarial loss weights of the full
// objective are fixed at zero: those terms are out of scope here, so the
// trained objective is lambda_M * MSE + lambda_R * |delta|_1.
struct TrainConfig {
  double lr = 0.1;
  int64_t steps = 2000;
  int64_t batch_rays = 256;
  double lambda_M = 1.0;
  double lambda_R = 1e-3;
  double sigma_perturb = 0.0;
  uint64_t seed = 0;

  std::vector<int64_t> plane_res = {16, 32};
  int64_t plane_channels = 4;
  double plane_extent = 1.0;
  double plane_init = 0.05;
  int64_t head_hidden = 64;
  int64_t posenc_freqs = 4;
  int64_t led_channels = 8;
  int64_t led_layers = 2;

  void validate() const;
};

std::string config_to_json(const TrainConfig& cfg);
// Starts from defaults and overrides the keys present; unknown keys fail.
TrainConfig config_from_json(const std::string& text);

// Mean squared error between pred [M,C] and a constant target of the same
// size. With a mask (size M), the mean runs over masked rows only.
Tensor mse_loss(const Tensor& pred, const std::vector<double>& target,
                const std::vector<uint8_t>* mask = nullptr);

// lambda_M * MSE + lambda_R * |delta|_1. An undefined delta (no deformation
// module) or lambda_R == 0 drops the regularizer exactly.
Tensor total_loss(const Tensor& pred_rgb, const std::vector<double>& target,
                  const std::vector<uint8_t>* mask, const Tensor& delta, const TrainConfig& cfg);

// Heavy-ball SGD: v = beta v + g, p -= lr v. Parameters without an
// accumulated gradient this step contribute g = 0.
struct SgdMomentum {
  double lr;
  double beta;
  std::vector<Tensor> params;
  std::vector<std::vector<double>> velocity;

  SgdMomentum(std::vector<Tensor> parameters, double lr, double beta = 0.9);
  void step();
};

struct TrainLogRow {
  int64_t step = 0;
  double loss = 0.0;
  double psnr = 0.0;  // batch estimate, 10 log10(1 / batch MSE)
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
  std::vector<double> per_target_psnr;      // masked, full render per target
  std::vector<double> per_target_delta_l1;  // zero-size without deformation
  double final_psnr = 0.0;                  // min over targets
};

// Overfits a fresh field (and deformation module, for head scenes) to the
// scene targets with seeded no-replacement ray batches. A non-finite loss
// aborts with the failing step index in the error message.
TrainResult train_overfit(const Scene& scene, const TrainConfig& config);

void write_log_csv(const std::vector<TrainLogRow>& log, const std::string& path);

// Self-contained render bundle: the checkpoint stores planes, head, optional
// deformation module and per-target coordinate-code pairs, plus a JSON
// metadata entry with render options and the base camera.
struct Session {
  RenderScene rscene;
  RenderOptions opts;
  Camera base_camera;
  std::vector<Tensor> pairs;  // per-target [6,Hs,Ws]; empty without deformation
};

Checkpoint session_to_checkpoint(const RenderScene& rscene, const RenderOptions& opts,
                                 const Camera& base_camera, const std::vector<Tensor>& pairs,
                                 const TrainConfig* cfg);
Session session_from_checkpoint(const Checkpoint& ckpt);

}  // namespace tpdr
