#include "training.hpp"
#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "metrics.hpp"
#include "ops.hpp"
#include "rasterizer.hpp"
#include "rng.hpp"

namespace tpdr {

namespace {

using nlohmann::json;

Tensor text_tensor(const std::string& s) {
  std::vector<double> d(s.size());
  for (size_t i = 0; i < s.size(); ++i) d[i] = static_cast<unsigned char>(s[i]);
  return Tensor::from_data({static_cast<int64_t>(s.size())}, std::move(d));
}

std::string text_from_tensor(const Tensor& t) {
  std::string s(static_cast<size_t>(t.numel()), '\0');
  for (int64_t i = 0; i < t.numel(); ++i) {
    s[static_cast<size_t>(i)] = static_cast<char>(
        static_cast<unsigned char>(std::llround(t.data()[i])));
  }
  return s;
}

Tensor regularized(const Tensor& mse, const Tensor& delta, const TrainConfig& cfg) {
  Tensor loss = mul_scalar(mse, cfg.lambda_M);
  if (delta.defined() && cfg.lambda_R != 0.0) {
    loss = add(loss, mul_scalar(deformation_l1(delta), cfg.lambda_R));
  }
  return loss;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (steps <= 0) throw std::invalid_argument("config: steps must be positive");
  if (batch_rays <= 0) throw std::invalid_argument("config: batch_rays must be positive");
  if (!(lambda_M >= 0.0) || !(lambda_R >= 0.0)) {
    throw std::invalid_argument("config: loss weights must be nonnegative");
  }
  if (!(sigma_perturb >= 0.0)) throw std::invalid_argument("config: sigma_perturb must be >= 0");
  if (plane_res.empty()) throw std::invalid_argument("config: plane_res must be nonempty");
  for (size_t i = 0; i < plane_res.size(); ++i) {
    if (plane_res[i] < 2) throw std::invalid_argument("config: plane resolution must be >= 2");
    if (i > 0 && plane_res[i] <= plane_res[i - 1]) {
      throw std::invalid_argument("config: plane_res must be strictly increasing");
    }
  }
  if (plane_channels <= 0) throw std::invalid_argument("config: plane_channels must be positive");
  if (!(plane_extent > 0.0)) throw std::invalid_argument("config: plane_extent must be positive");
  if (head_hidden <= 0) throw std::invalid_argument("config: head_hidden must be positive");
  if (posenc_freqs < 0) throw std::invalid_argument("config: posenc_freqs must be >= 0");
  if (led_channels <= 0) throw std::invalid_argument("config: led_channels must be positive");
  if (led_layers < 1 || led_layers > 4) {
    throw std::invalid_argument("config: led_layers must be in [1,4]");
  }
}

std::string config_to_json(const TrainConfig& cfg) {
  json j;
  j["lr"] = cfg.lr;
  j["steps"] = cfg.steps;
  j["batch_rays"] = cfg.batch_rays;
  j["lambda_M"] = cfg.lambda_M;
  j["lambda_R"] = cfg.lambda_R;
  j["sigma_perturb"] = cfg.sigma_perturb;
  j["seed"] = cfg.seed;
  j["plane_res"] = cfg.plane_res;
  j["plane_channels"] = cfg.plane_channels;
  j["plane_extent"] = cfg.plane_extent;
  j["plane_init"] = cfg.plane_init;
  j["head_hidden"] = cfg.head_hidden;
  j["posenc_freqs"] = cfg.posenc_freqs;
  j["led_channels"] = cfg.led_channels;
  j["led_layers"] = cfg.led_layers;
  return j.dump(2) + "\n";
}

TrainConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("config parse error: " + std::string(e.what()));
  }
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lr") {
        cfg.lr = value.get<double>();
      } else if (key == "steps") {
        cfg.steps = value.get<int64_t>();
      } else if (key == "batch_rays") {
        cfg.batch_rays = value.get<int64_t>();
      } else if (key == "lambda_M") {
        cfg.lambda_M = value.get<double>();
      } else if (key == "lambda_R") {
        cfg.lambda_R = value.get<double>();
      } else if (key == "sigma_perturb") {
        cfg.sigma_perturb = value.get<double>();
      } else if (key == "seed") {
        cfg.seed = value.get<uint64_t>();
      } else if (key == "plane_res") {
        cfg.plane_res = value.get<std::vector<int64_t>>();
      } else if (key == "plane_channels") {
        cfg.plane_channels = value.get<int64_t>();
      } else if (key == "plane_extent") {
        cfg.plane_extent = value.get<double>();
      } else if (key == "plane_init") {
        cfg.plane_init = value.get<double>();
      } else if (key == "head_hidden") {
        cfg.head_hidden = value.get<int64_t>();
      } else if (key == "posenc_freqs") {
        cfg.posenc_freqs = value.get<int64_t>();
      } else if (key == "led_channels") {
        cfg.led_channels = value.get<int64_t>();
      } else if (key == "led_layers") {
        cfg.led_layers = value.get<int64_t>();
      } else {
        throw ParseError("config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError("config field error: " + std::string(e.what()));
  }
  cfg.validate();
  return cfg;
}

Tensor mse_loss(const Tensor& pred, const std::vector<double>& target,
                const std::vector<uint8_t>* mask) {
  if (!pred.defined() || pred.ndim() != 2) {
    throw std::invalid_argument("mse_loss: pred must be a [rows, channels] tensor");
  }
  if (static_cast<int64_t>(target.size()) != pred.numel()) {
    throw std::invalid_argument("mse_loss: target size does not match pred");
  }
  const Tensor t = Tensor::from_data(pred.shape(), target);
  const Tensor sq = [&] {
    const Tensor diff = sub(pred, t);
    return mul(diff, diff);
  }();
  if (mask == nullptr) return mean(sq);
  const int64_t rows = pred.dim(0), cols = pred.dim(1);
  if (static_cast<int64_t>(mask->size()) != rows) {
    throw std::invalid_argument("mse_loss: mask size does not match pred rows");
  }
  int64_t count = 0;
  for (const uint8_t m : *mask) count += m ? 1 : 0;
  if (count == 0) throw std::invalid_argument("mse_loss: mask is empty");
  std::vector<double> w(static_cast<size_t>(rows) * cols, 0.0);
  const double inv = 1.0 / (static_cast<double>(count) * cols);
  for (int64_t r = 0; r < rows; ++r) {
    if (!(*mask)[static_cast<size_t>(r)]) continue;
    for (int64_t c = 0; c < cols; ++c) w[static_cast<size_t>(r * cols + c)] = inv;
  }
  return sum(mul(sq, Tensor::from_data(pred.shape(), std::move(w))));
}

Tensor total_loss(const Tensor& pred_rgb, const std::vector<double>& target,
                  const std::vector<uint8_t>* mask, const Tensor& delta, const TrainConfig& cfg) {
  return regularized(mse_loss(pred_rgb, target, mask), delta, cfg);
}

SgdMomentum::SgdMomentum(std::vector<Tensor> parameters, double lr_in, double beta_in)
    : lr(lr_in), beta(beta_in), params(std::move(parameters)) {
  velocity.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    velocity[i].assign(static_cast<size_t>(params[i].numel()), 0.0);
  }
}

void SgdMomentum::step() {
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const double* g = p.has_grad() ? p.grad().data() : nullptr;
    double* d = p.data();
    std::vector<double>& v = velocity[i];
    for (size_t j = 0; j < v.size(); ++j) {
      v[j] = beta * v[j] + (g ? g[j] : 0.0);
      d[j] -= lr * v[j];
    }
    p.zero_grad();
  }
}

TrainResult train_overfit(const Scene& scene, const TrainConfig& config) {
  scene.validate();
  config.validate();

  Rng plane_rng(config.seed);
  RenderScene rscene;
  for (const int64_t res : config.plane_res) {
    rscene.planes.levels.push_back(
        make_level(plane_rng, config.plane_channels, res, config.plane_extent, config.plane_init));
  }
  for (TriPlaneLevel& level : rscene.planes.levels) {
    for (Tensor* t : {&level.xy, &level.xz, &level.yz}) t->set_requires_grad(true);
  }
  rscene.head = make_radiance_head(rscene.planes.total_channels() + 6 * config.posenc_freqs,
                                   config.head_hidden, config.seed + 1);

  std::vector<Tensor> pairs;
  if (scene.has_model()) {
    rscene.use_led = true;
    rscene.led = make_led(scene.n_samples, static_cast<int>(config.led_channels),
                          static_cast<int>(config.led_layers), static_cast<int>(config.led_layers),
                          static_cast<int>(config.led_layers), config.seed + 2);
    for (const SceneTarget& target : scene.targets) {
      const auto [dri, can] =
          make_secc_pair(scene.model, scene.z_shp, target.z_exp, scene.secc_camera);
      pairs.push_back(secc_pair_tensor(dri, can));
    }
  }

  std::vector<Tensor> params;
  for (const TriPlaneLevel& level : rscene.planes.levels) {
    params.push_back(level.xy);
    params.push_back(level.xz);
    params.push_back(level.yz);
  }
  for (const auto& [name, t] : rscene.head.parameters()) params.push_back(t);
  if (rscene.use_led) {
    for (const auto& [name, t] : rscene.led.parameters()) params.push_back(t);
  }
  SgdMomentum opt(params, config.lr);

  RenderOptions opts;
  opts.n_samples = scene.n_samples;
  opts.t_near = scene.t_near;
  opts.t_far = scene.t_far;
  opts.posenc_freqs = static_cast<int>(config.posenc_freqs);
  opts.sigma_perturb = config.sigma_perturb;

  const size_t n_targets = scene.targets.size();
  std::vector<std::vector<int64_t>> order(n_targets);
  std::vector<size_t> cursor(n_targets, 0);
  Rng batch_rng(config.seed + 3);
  for (size_t t = 0; t < n_targets; ++t) {
    const int64_t n_rays =
        static_cast<int64_t>(scene.targets[t].camera.width) * scene.targets[t].camera.height;
    order[t].resize(static_cast<size_t>(n_rays));
    for (int64_t i = 0; i < n_rays; ++i) order[t][static_cast<size_t>(i)] = i;
    batch_rng.shuffle(order[t]);
  }

  TrainResult result;
  result.log.reserve(static_cast<size_t>(config.steps));
  for (int64_t s = 0; s < config.steps; ++s) {
    const size_t ti = static_cast<size_t>(s) % n_targets;
    const SceneTarget& target = scene.targets[ti];
    std::vector<int64_t>& ids = order[ti];
    const size_t batch =
        std::min(static_cast<size_t>(config.batch_rays), ids.size());
    if (cursor[ti] + batch > ids.size()) {
      batch_rng.shuffle(ids);
      cursor[ti] = 0;
    }
    const std::vector<int64_t> ray_ids(ids.begin() + static_cast<int64_t>(cursor[ti]),
                                       ids.begin() + static_cast<int64_t>(cursor[ti] + batch));
    cursor[ti] += batch;

    if (rscene.use_led) rscene.secc_pair = pairs[ti];
    opts.perturb_seed = config.seed + 1000003ULL * static_cast<uint64_t>(s + 1);
    const RenderResult rr = render_rays(rscene, target.camera, opts, ray_ids);
    const Tensor pred = slice_cols(rr.rgb_alpha, 0, 3);
    std::vector<double> tgt(batch * 3);
    for (size_t i = 0; i < batch; ++i) {
      for (int c = 0; c < 3; ++c) {
        tgt[i * 3 + c] = target.rgb[static_cast<size_t>(ray_ids[i]) * 3 + c];
      }
    }
    const Tensor mse = mse_loss(pred, tgt, nullptr);
    const double mse_v = mse.item();
    const Tensor loss = regularized(mse, rr.delta, config);
    const double loss_v = loss.item();
    if (!std::isfinite(loss_v)) {
      clear_graph();
      throw NumericError("training diverged: non-finite loss at step " + std::to_string(s));
    }
    backward(loss);
    opt.step();
    // Catch divergence at the update, before the next forward trips a
    // precondition check deep inside sampling with a misleading error class.
    for (const Tensor& p : params) {
      const double* d = p.data();
      for (int64_t i = 0; i < p.numel(); ++i) {
        if (!std::isfinite(d[i])) {
          throw NumericError("training diverged: non-finite parameters at step " +
                             std::to_string(s));
        }
      }
    }
    result.log.push_back(
        {s, loss_v,
         mse_v > 0.0 ? 10.0 * std::log10(1.0 / mse_v) : std::numeric_limits<double>::infinity()});
  }

  {
    NoGradGuard ng;
    RenderOptions eval = opts;
    eval.sigma_perturb = 0.0;
    for (size_t ti = 0; ti < n_targets; ++ti) {
      const SceneTarget& target = scene.targets[ti];
      if (rscene.use_led) rscene.secc_pair = pairs[ti];
      const RenderResult rr = render_image(rscene, target.camera, eval);
      result.per_target_psnr.push_back(psnr_masked(rr.rgb_image(), target.rgb, target.mask));
      if (rr.delta.defined()) {
        result.per_target_delta_l1.push_back(deformation_l1(rr.delta).item());
      }
    }
  }
  result.final_psnr = *std::min_element(result.per_target_psnr.begin(),
                                        result.per_target_psnr.end());
  if (rscene.use_led) rscene.secc_pair = pairs[0];
  result.checkpoint =
      session_to_checkpoint(rscene, opts, scene.targets[0].camera, pairs, &config);
  return result;
}

void write_log_csv(const std::vector<TrainLogRow>& log, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.precision(17);
  os << "step,loss,psnr\n";
  for (const TrainLogRow& row : log) {
    os << row.step << "," << row.loss << ",";
    if (std::isinf(row.psnr)) {
      os << "inf";
    } else {
      os << row.psnr;
    }
    os << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

Checkpoint session_to_checkpoint(const RenderScene& rscene, const RenderOptions& opts,
                                 const Camera& base_camera, const std::vector<Tensor>& pairs,
                                 const TrainConfig* cfg) {
  json meta;
  meta["render"] = {{"n_samples", opts.n_samples},
                    {"t_near", opts.t_near},
                    {"t_far", opts.t_far},
                    {"posenc_freqs", opts.posenc_freqs},
                    {"extent", rscene.planes.levels.empty() ? 1.0
                                                            : rscene.planes.levels[0].extent},
                    {"use_led", rscene.use_led},
                    {"n_pairs", pairs.size()}};
  meta["base_camera"] = json::parse(camera_to_json(base_camera));
  if (cfg != nullptr) meta["train"] = json::parse(config_to_json(*cfg));

  Checkpoint ckpt;
  ckpt.put("meta.json", text_tensor(meta.dump()));
  put_planes(ckpt, rscene.planes);
  put_head(ckpt, rscene.head);
  if (rscene.use_led) {
    put_led(ckpt, rscene.led);
    for (size_t i = 0; i < pairs.size(); ++i) {
      ckpt.put("secc.pair" + std::to_string(i), pairs[i]);
    }
  }
  return ckpt;
}

Session session_from_checkpoint(const Checkpoint& ckpt) {
  json meta;
  try {
    meta = json::parse(text_from_tensor(ckpt.require("meta.json")));
  } catch (const json::exception& e) {
    throw ParseError("checkpoint meta parse error: " + std::string(e.what()));
  }
  Session session;
  try {
    const json& r = meta.at("render");
    session.opts.n_samples = r.at("n_samples").get<int>();
    session.opts.t_near = r.at("t_near").get<double>();
    session.opts.t_far = r.at("t_far").get<double>();
    session.opts.posenc_freqs = r.at("posenc_freqs").get<int>();
    const double extent = r.at("extent").get<double>();
    session.rscene.planes = planes_from_checkpoint(ckpt, extent);
    session.rscene.head = head_from_checkpoint(ckpt);
    session.base_camera = camera_from_json(meta.at("base_camera").dump());
    if (r.at("use_led").get<bool>()) {
      session.rscene.use_led = true;
      session.rscene.led = led_from_checkpoint(ckpt);
      const size_t n_pairs = r.at("n_pairs").get<size_t>();
      for (size_t i = 0; i < n_pairs; ++i) {
        session.pairs.push_back(ckpt.require("secc.pair" + std::to_string(i)));
      }
      if (session.pairs.empty()) {
        throw ParseError("checkpoint: deformation enabled but no coordinate-code pairs");
      }
      session.rscene.secc_pair = session.pairs[0];
    }
  } catch (const json::exception& e) {
    throw ParseError("checkpoint meta field error: " + std::string(e.what()));
  }
  return session;
}

}  // namespace tpdr
