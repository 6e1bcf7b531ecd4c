#include "renderer.hpp"

#include <cmath>
#include <stdexcept>

#include "checkpoint.hpp"
#include "image_io.hpp"
#include "ops.hpp"
#include "rng.hpp"

namespace tpdr {

void RadianceHead::validate() const {
  if (w1.ndim() != 2 || b1.ndim() != 1 || w2.ndim() != 2 || b2.ndim() != 1 ||
      w1.dim(1) != b1.dim(0) || w2.dim(0) != w1.dim(1) || w2.dim(1) != 4 || b2.dim(0) != 4) {
    throw std::invalid_argument("radiance head: inconsistent layer shapes");
  }
}

std::vector<std::pair<std::string, Tensor>> RadianceHead::parameters() const {
  return {{"head.layer0.w", w1}, {"head.layer0.b", b1}, {"head.layer1.w", w2},
          {"head.layer1.b", b2}};
}

RadianceHead make_radiance_head(int64_t in_dim, int64_t hidden, uint64_t seed) {
  if (in_dim <= 0 || hidden <= 0) {
    throw std::invalid_argument("make_radiance_head: dimensions must be positive");
  }
  Rng rng(seed);
  auto init = [&](int64_t rows, int64_t cols) {
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    const double s = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& v : data) v = rng.uniform(-s, s);
    return Tensor::param({rows, cols}, std::move(data));
  };
  RadianceHead head;
  head.w1 = init(in_dim, hidden);
  head.b1 = Tensor::param({hidden}, std::vector<double>(hidden, 0.0));
  head.w2 = init(hidden, 4);
  head.b2 = Tensor::param({4}, std::vector<double>(4, 0.0));
  head.validate();
  return head;
}

std::pair<Tensor, Tensor> query_radiance(const RadianceHead& head, const Tensor& features,
                                         const Tensor& gamma) {
  head.validate();
  const Tensor x = gamma.defined() ? concat({features, gamma}, 1) : features;
  if (x.ndim() != 2 || x.dim(1) != head.in_dim()) {
    throw std::invalid_argument("query_radiance: input width " + std::to_string(x.dim(1)) +
                                " does not match head input " + std::to_string(head.in_dim()));
  }
  const Tensor h = leaky_relu(add_rowvec(matmul(x, head.w1), head.b1), head.leak);
  const Tensor y = add_rowvec(matmul(h, head.w2), head.b2);
  return {sigmoid(slice_cols(y, 0, 3)), softplus(slice_cols(y, 3, 4))};
}

Tensor composite_rays(const Tensor& rgb_sigma, const std::vector<double>& depths, double t_far,
                      int n_samples) {
  if (rgb_sigma.ndim() != 2 || rgb_sigma.dim(1) != 4) {
    throw std::invalid_argument("composite: rgb_sigma must be [rays*samples, 4], got " +
                                shape_str(rgb_sigma.shape()));
  }
  if (n_samples < 1 || rgb_sigma.dim(0) % n_samples != 0) {
    throw std::invalid_argument("composite: row count not a multiple of n_samples");
  }
  if (depths.size() != static_cast<size_t>(rgb_sigma.dim(0))) {
    throw std::invalid_argument("composite: depths size does not match samples");
  }
  const int64_t n_rays = rgb_sigma.dim(0) / n_samples;
  const int64_t n = n_samples;
  for (int64_t r = 0; r < n_rays; ++r) {
    for (int64_t i = 0; i < n; ++i) {
      const double d = depths[r * n + i];
      if (!std::isfinite(d) || (i > 0 && d <= depths[r * n + i - 1])) {
        throw std::invalid_argument("composite: depths not strictly increasing on ray " +
                                    std::to_string(r));
      }
    }
    if (depths[r * n + n - 1] >= t_far) {
      throw std::invalid_argument("composite: last depth reaches t_far on ray " +
                                  std::to_string(r));
    }
  }

  // Shared per-ray sweep; fills colors/alpha and transmittance tables.
  auto sweep = [n, t_far](const double* in, const double* dep, double* alphas, double* trans,
                          double* out4) {
    double T = 1.0;
    double acc[3] = {0.0, 0.0, 0.0};
    for (int64_t i = 0; i < n; ++i) {
      const double delta = (i + 1 < n ? dep[i + 1] : t_far) - dep[i];
      const double a = 1.0 - std::exp(-in[i * 4 + 3] * delta);
      alphas[i] = a;
      trans[i] = T;
      for (int c = 0; c < 3; ++c) acc[c] += T * a * in[i * 4 + c];
      T *= 1.0 - a;
    }
    out4[0] = acc[0];
    out4[1] = acc[1];
    out4[2] = acc[2];
    out4[3] = 1.0 - T;
  };

  std::vector<double> out(static_cast<size_t>(n_rays) * 4);
  std::vector<double> alphas(n), trans(n);
  for (int64_t r = 0; r < n_rays; ++r) {
    sweep(rgb_sigma.data() + r * n * 4, depths.data() + r * n, alphas.data(), trans.data(),
          out.data() + r * 4);
  }

  std::vector<double> deps = depths;
  return make_op(
      "composite_rays", {rgb_sigma}, {n_rays, 4}, std::move(out),
      [rgb_sigma, deps = std::move(deps), t_far, n, n_rays, sweep](const Tensor& node) {
        const std::vector<double>& g = node.grad();
        std::vector<double>& gi = rgb_sigma.grad_accum();
        std::vector<double> alphas(n), trans(n), out4(4);
        for (int64_t r = 0; r < n_rays; ++r) {
          const double* in = rgb_sigma.data() + r * n * 4;
          const double* dep = deps.data() + r * n;
          sweep(in, dep, alphas.data(), trans.data(), out4.data());
          // Suffix recursions: G_c[k] composites the samples behind k,
          // Q[k] is their joint transparency. Both keep the backward free of
          // divisions by (1 - alpha).
          double G[3] = {0.0, 0.0, 0.0};
          double Q = 1.0;
          for (int64_t k = n - 1; k >= 0; --k) {
            const double delta = (k + 1 < n ? dep[k + 1] : t_far) - dep[k];
            const double T = trans[k], a = alphas[k];
            double d_alpha = g[r * 4 + 3] * T * Q;
            for (int c = 0; c < 3; ++c) {
              const double col = in[k * 4 + c];
              gi[(r * n + k) * 4 + c] += g[r * 4 + c] * T * a;
              d_alpha += g[r * 4 + c] * T * (col - G[c]);
              G[c] = a * col + (1.0 - a) * G[c];
            }
            // d alpha_k / d sigma_k = delta * exp(-sigma delta) = delta*(1-a)
            gi[(r * n + k) * 4 + 3] += d_alpha * delta * (1.0 - a);
            Q *= 1.0 - a;
          }
        }
      });
}

Tensor integrate_ray(const Tensor& rgb, const Tensor& sigma, const std::vector<double>& depths,
                     double t_far) {
  if (rgb.ndim() != 2 || rgb.dim(1) != 3 || sigma.ndim() != 1 || sigma.dim(0) != rgb.dim(0)) {
    throw std::invalid_argument("integrate_ray: expected rgb [N,3] and sigma [N]");
  }
  const int64_t n = rgb.dim(0);
  const Tensor rgb_sigma = concat({rgb, reshape(sigma, {n, 1})}, 1);
  return reshape(composite_rays(rgb_sigma, depths, t_far, static_cast<int>(n)), {4});
}

namespace {

Tensor resized_pair(const Tensor& pair, int height, int width) {
  if (pair.ndim() != 3 || pair.dim(0) != 6) {
    throw std::invalid_argument("render: secc pair must be [6,H,W], got " +
                                shape_str(pair.shape()));
  }
  if (pair.dim(1) == height && pair.dim(2) == width) return pair;
  std::vector<double> data(pair.data(), pair.data() + pair.numel());
  return Tensor::from_data(
      {6, height, width},
      resize_bilinear_chw(data, 6, static_cast<int>(pair.dim(1)), static_cast<int>(pair.dim(2)),
                          height, width));
}

}  // namespace

RenderResult render_rays(const RenderScene& scene, const Camera& cam, const RenderOptions& opts,
                         const std::vector<int64_t>& ray_ids) {
  scene.planes.validate();
  scene.head.validate();
  if (opts.n_samples < 2) throw std::invalid_argument("render: need at least 2 samples per ray");
  if (ray_ids.empty()) throw std::invalid_argument("render: empty ray list");
  const int64_t n_rays_total = static_cast<int64_t>(cam.width) * cam.height;
  for (const int64_t id : ray_ids) {
    if (id < 0 || id >= n_rays_total) {
      throw std::invalid_argument("render: ray id " + std::to_string(id) + " out of range");
    }
  }

  const RayBatch rays = generate_rays(cam, opts.t_near, opts.t_far);
  const PointBatch points = stratified_sample(rays, opts.n_samples, opts.seed, opts.jitter);
  const int64_t n = opts.n_samples;

  RenderResult res;
  res.width = cam.width;
  res.height = cam.height;
  res.ray_ids = ray_ids;

  Tensor all_rows;
  if (scene.use_led) {
    const Tensor pair = resized_pair(scene.secc_pair, cam.height, cam.width);
    const DeformationBatch batch =
        apply_deformation(scene.led, points, pair, opts.sigma_perturb, opts.perturb_seed);
    all_rows = batch.deformed_rows;
    res.delta = batch.delta;
  } else {
    all_rows = points.positions_rows();
  }

  std::vector<int64_t> sample_rows;
  sample_rows.reserve(ray_ids.size() * n);
  for (const int64_t id : ray_ids) {
    for (int64_t i = 0; i < n; ++i) sample_rows.push_back(id * n + i);
  }
  const Tensor rows = gather_rows(all_rows, sample_rows);
  const Tensor feats = sample_multiscale(scene.planes, rows);

  // gamma(p) encodes the original, undeformed positions.
  Tensor gamma;
  if (opts.posenc_freqs > 0) {
    const int64_t g_dim = 6 * opts.posenc_freqs;
    std::vector<double> g_data;
    g_data.reserve(sample_rows.size() * g_dim);
    for (const int64_t row : sample_rows) {
      const std::vector<double> enc =
          positional_encoding(points.positions.data() + row * 3, 3, opts.posenc_freqs);
      g_data.insert(g_data.end(), enc.begin(), enc.end());
    }
    gamma = Tensor::from_data({static_cast<int64_t>(sample_rows.size()), g_dim},
                              std::move(g_data));
  }

  const auto [rgb, sig] = query_radiance(scene.head, feats, gamma);
  const Tensor rgb_sigma = concat({rgb, sig}, 1);

  std::vector<double> depths;
  depths.reserve(sample_rows.size());
  for (const int64_t row : sample_rows) depths.push_back(points.depths[row]);
  res.rgb_alpha = composite_rays(rgb_sigma, depths, opts.t_far, opts.n_samples);
  return res;
}

RenderResult render_image(const RenderScene& scene, const Camera& cam,
                          const RenderOptions& opts) {
  std::vector<int64_t> all(static_cast<size_t>(cam.width) * cam.height);
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int64_t>(i);
  return render_rays(scene, cam, opts, all);
}

std::vector<double> RenderResult::rgb_image() const {
  std::vector<double> out(static_cast<size_t>(width) * height * 3, 0.0);
  for (size_t b = 0; b < ray_ids.size(); ++b) {
    for (int c = 0; c < 3; ++c) out[ray_ids[b] * 3 + c] = rgb_alpha.data()[b * 4 + c];
  }
  return out;
}

std::vector<double> RenderResult::alpha_image() const {
  std::vector<double> out(static_cast<size_t>(width) * height, 0.0);
  for (size_t b = 0; b < ray_ids.size(); ++b) out[ray_ids[b]] = rgb_alpha.data()[b * 4 + 3];
  return out;
}

Camera orbit_camera(const Camera& base, double yaw, double pitch) {
  Camera cam = base;
  cam.R = mat3_mul(mat3_mul(base.R, rotation_y(yaw)), rotation_x(pitch));
  return cam;
}

OrbitResult orbit_render(const RenderScene& scene, const Camera& base,
                         const std::vector<double>& yaw_list,
                         const std::vector<double>& pitch_list, const RenderOptions& opts) {
  if (!pitch_list.empty() && pitch_list.size() != yaw_list.size()) {
    throw std::invalid_argument("orbit: pitch list must be empty or match yaw list");
  }
  OrbitResult out;
  for (size_t i = 0; i < yaw_list.size(); ++i) {
    const double pitch = pitch_list.empty() ? 0.0 : pitch_list[i];
    const Camera cam = orbit_camera(base, yaw_list[i], pitch);
    out.cameras.push_back(cam);
    out.frames.push_back(render_image(scene, cam, opts));
  }
  return out;
}

void put_head(Checkpoint& ckpt, const RadianceHead& head) {
  head.validate();
  for (const auto& [name, tensor] : head.parameters()) ckpt.put(name, tensor);
}

RadianceHead head_from_checkpoint(const Checkpoint& ckpt) {
  RadianceHead head;
  head.w1 = ckpt.require("head.layer0.w");
  head.b1 = ckpt.require("head.layer0.b");
  head.w2 = ckpt.require("head.layer1.w");
  head.b2 = ckpt.require("head.layer1.b");
  for (Tensor* t : {&head.w1, &head.b1, &head.w2, &head.b2}) t->set_requires_grad(true);
  head.validate();
  return head;
}

}  // namespace tpdr
