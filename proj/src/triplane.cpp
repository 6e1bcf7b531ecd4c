#include "triplane.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "checkpoint.hpp"
#include "ops.hpp"

namespace tpdr {

namespace {

struct PlanePair {
  int a, b;  // world axis feeding columns, rows
};
constexpr PlanePair kPairs[3] = {{0, 1}, {0, 2}, {1, 2}};

struct Tap {
  int64_t a0, b0;
  double fa, fb;
  double da, db;  // d(grid coord)/d(world coord); 0 where clamped
};

Tap make_tap(double u, double v, int64_t res, double extent) {
  const double scale = (res - 1) / (2.0 * extent);
  Tap t;
  double ga = (u + extent) * scale;
  double gb = (v + extent) * scale;
  t.da = (ga >= 0.0 && ga <= res - 1) ? scale : 0.0;
  t.db = (gb >= 0.0 && gb <= res - 1) ? scale : 0.0;
  ga = std::min(std::max(ga, 0.0), static_cast<double>(res - 1));
  gb = std::min(std::max(gb, 0.0), static_cast<double>(res - 1));
  t.a0 = std::min(static_cast<int64_t>(ga), res - 2);
  t.b0 = std::min(static_cast<int64_t>(gb), res - 2);
  t.fa = ga - static_cast<double>(t.a0);
  t.fb = gb - static_cast<double>(t.b0);
  return t;
}

// Bilinear read of channel c at a tap; plane is [C, res, res].
double tap_value(const double* plane, int64_t c, int64_t res, const Tap& t) {
  const double* base = plane + (c * res + t.b0) * res + t.a0;
  const double v00 = base[0], v01 = base[1];
  const double v10 = base[res], v11 = base[res + 1];
  return (1 - t.fb) * ((1 - t.fa) * v00 + t.fa * v01) + t.fb * ((1 - t.fa) * v10 + t.fa * v11);
}

}  // namespace

void TriPlaneLevel::validate() const {
  const Tensor* planes[3] = {&xy, &xz, &yz};
  for (const Tensor* p : planes) {
    if (!p->defined() || p->ndim() != 3 || p->dim(1) != p->dim(2)) {
      throw std::invalid_argument("tri-plane: each plane must be a square [C,R,R] grid");
    }
    if (p->dim(0) != xy.dim(0) || p->dim(1) != xy.dim(1)) {
      throw std::invalid_argument("tri-plane: planes disagree on channels or resolution");
    }
  }
  if (xy.dim(1) < 2) throw std::invalid_argument("tri-plane: resolution must be at least 2");
  if (!(extent > 0.0)) throw std::invalid_argument("tri-plane: extent must be positive");
}

int64_t MultiScaleTriPlane::total_channels() const {
  int64_t total = 0;
  for (const TriPlaneLevel& l : levels) total += l.channels();
  return total;
}

void MultiScaleTriPlane::validate() const {
  if (levels.empty()) throw std::invalid_argument("tri-plane: no levels");
  for (const TriPlaneLevel& l : levels) l.validate();
  for (size_t j = 1; j < levels.size(); ++j) {
    if (levels[j].res() <= levels[j - 1].res()) {
      throw std::invalid_argument("tri-plane: level resolutions must strictly increase");
    }
  }
}

TriPlaneLevel make_level(Rng& rng, int64_t channels, int64_t res, double extent, double init_scale) {
  auto plane = [&] {
    std::vector<double> v(static_cast<size_t>(channels * res * res));
    for (double& x : v) x = rng.uniform(-init_scale, init_scale);
    return Tensor::param({channels, res, res}, std::move(v));
  };
  TriPlaneLevel level;
  level.xy = plane();
  level.xz = plane();
  level.yz = plane();
  level.extent = extent;
  return level;
}

Tensor sample_level(const TriPlaneLevel& level, const Tensor& points) {
  level.validate();
  if (!points.defined() || points.ndim() != 2 || points.dim(1) != 3) {
    throw std::invalid_argument("sample_level: points must be [M,3], got " +
                                (points.defined() ? shape_str(points.shape()) : std::string("undefined")));
  }
  const int64_t m = points.dim(0), c = level.channels(), res = level.res();
  const double extent = level.extent;
  const Tensor planes[3] = {level.xy, level.xz, level.yz};

  const double* pp = points.data();
  for (int64_t i = 0; i < points.numel(); ++i) {
    if (!std::isfinite(pp[i])) {
      throw std::invalid_argument("sample_level: non-finite point at row " + std::to_string(i / 3));
    }
  }

  std::vector<double> out(static_cast<size_t>(m * c), 0.0);
  for (int64_t i = 0; i < m; ++i) {
    const double* p = pp + i * 3;
    for (int k = 0; k < 3; ++k) {
      const Tap t = make_tap(p[kPairs[k].a], p[kPairs[k].b], res, extent);
      const double* plane = planes[k].data();
      for (int64_t ch = 0; ch < c; ++ch) {
        out[static_cast<size_t>(i * c + ch)] += tap_value(plane, ch, res, t) / 3.0;
      }
    }
  }

  Tensor xy = level.xy, xz = level.xz, yz = level.yz;
  return make_op(
      "sample_level", {xy, xz, yz, points}, {m, c}, std::move(out),
      [xy, xz, yz, points, m, c, res, extent](const Tensor& o) mutable {
        const auto& g = o.grad();
        const Tensor planes[3] = {xy, xz, yz};
        const bool need_points = points.requires_grad();
        double* gpts = need_points ? points.grad_accum().data() : nullptr;
        const double* pp = points.data();
        for (int k = 0; k < 3; ++k) {
          const bool need_plane = planes[k].requires_grad();
          if (!need_plane && !need_points) continue;
          double* gp = need_plane ? planes[k].grad_accum().data() : nullptr;
          const double* plane = planes[k].data();
          for (int64_t i = 0; i < m; ++i) {
            const double* p = pp + i * 3;
            const Tap t = make_tap(p[kPairs[k].a], p[kPairs[k].b], res, extent);
            double acc_a = 0.0, acc_b = 0.0;
            for (int64_t ch = 0; ch < c; ++ch) {
              const double go = g[static_cast<size_t>(i * c + ch)] / 3.0;
              if (go == 0.0) continue;
              const int64_t base = (ch * res + t.b0) * res + t.a0;
              if (gp) {
                gp[base] += go * (1 - t.fa) * (1 - t.fb);
                gp[base + 1] += go * t.fa * (1 - t.fb);
                gp[base + res] += go * (1 - t.fa) * t.fb;
                gp[base + res + 1] += go * t.fa * t.fb;
              }
              if (gpts) {
                const double v00 = plane[base], v01 = plane[base + 1];
                const double v10 = plane[base + res], v11 = plane[base + res + 1];
                acc_a += go * ((1 - t.fb) * (v01 - v00) + t.fb * (v11 - v10));
                acc_b += go * ((1 - t.fa) * (v10 - v00) + t.fa * (v11 - v01));
              }
            }
            if (gpts) {
              gpts[i * 3 + kPairs[k].a] += acc_a * t.da;
              gpts[i * 3 + kPairs[k].b] += acc_b * t.db;
            }
          }
        }
      });
}

Tensor sample_multiscale(const MultiScaleTriPlane& ms, const Tensor& points) {
  ms.validate();
  std::vector<Tensor> parts;
  parts.reserve(ms.levels.size());
  for (const TriPlaneLevel& level : ms.levels) parts.push_back(sample_level(level, points));
  if (parts.size() == 1) return parts[0];
  return concat(parts, 1);
}

namespace {

// Resamples plane [C,R,R] at per-node continuous grid coords (gx, gy),
// border-clamped. Taps are fixed, so this is linear in the plane values.
Tensor resample_plane(const Tensor& plane, const std::vector<Tap>& taps) {
  const int64_t c = plane.dim(0), res = plane.dim(1);
  std::vector<double> out(static_cast<size_t>(plane.numel()));
  const double* src = plane.data();
  for (int64_t n = 0; n < res * res; ++n) {
    const Tap& t = taps[static_cast<size_t>(n)];
    for (int64_t ch = 0; ch < c; ++ch) out[static_cast<size_t>(ch * res * res + n)] = tap_value(src, ch, res, t);
  }
  return make_op("resample_plane", {plane}, plane.shape(), std::move(out),
                 [plane, taps, c, res](const Tensor& o) mutable {
                   if (!plane.requires_grad()) return;
                   const auto& g = o.grad();
                   double* gp = plane.grad_accum().data();
                   for (int64_t n = 0; n < res * res; ++n) {
                     const Tap& t = taps[static_cast<size_t>(n)];
                     for (int64_t ch = 0; ch < c; ++ch) {
                       const double go = g[static_cast<size_t>(ch * res * res + n)];
                       if (go == 0.0) continue;
                       const int64_t base = (ch * res + t.b0) * res + t.a0;
                       gp[base] += go * (1 - t.fa) * (1 - t.fb);
                       gp[base + 1] += go * t.fa * (1 - t.fb);
                       gp[base + res] += go * (1 - t.fa) * t.fb;
                       gp[base + res + 1] += go * t.fa * t.fb;
                     }
                   }
                 });
}

}  // namespace

TriPlaneLevel camera_to_world_planes(const TriPlaneLevel& level, const Mat3& R, const Vec3& t) {
  level.validate();
  validate_rotation(R);
  const int64_t res = level.res();
  const double extent = level.extent;

  TriPlaneLevel out;
  out.extent = extent;
  Tensor* dst[3] = {&out.xy, &out.xz, &out.yz};
  const Tensor* src[3] = {&level.xy, &level.xz, &level.yz};
  for (int k = 0; k < 3; ++k) {
    std::vector<Tap> taps(static_cast<size_t>(res * res));
    for (int64_t j = 0; j < res; ++j) {
      const double b = -extent + 2.0 * extent * j / (res - 1);
      for (int64_t i = 0; i < res; ++i) {
        const double a = -extent + 2.0 * extent * i / (res - 1);
        // Surface point of this node: the missing axis is 0.
        Vec3 p{0, 0, 0};
        p[static_cast<size_t>(kPairs[k].a)] = a;
        p[static_cast<size_t>(kPairs[k].b)] = b;
        Vec3 q = mat3_apply(R, p);
        for (int d = 0; d < 3; ++d) q[d] += t[d];
        taps[static_cast<size_t>(j * res + i)] =
            make_tap(q[static_cast<size_t>(kPairs[k].a)], q[static_cast<size_t>(kPairs[k].b)], res, extent);
      }
    }
    *dst[k] = resample_plane(*src[k], taps);
  }
  return out;
}

std::vector<Tensor> PyramidEncoder::parameters() const {
  std::vector<Tensor> params{stem_w, stem_b};
  for (size_t i = 0; i < down_w.size(); ++i) {
    params.push_back(down_w[i]);
    params.push_back(down_b[i]);
  }
  for (size_t i = 0; i < psi_w.size(); ++i) {
    params.push_back(psi_w[i]);
    params.push_back(psi_b[i]);
  }
  return params;
}

PyramidEncoder make_pyramid_encoder(Rng& rng, int64_t in_channels, int64_t mid_channels,
                                    int64_t plane_channels, int64_t n_levels, double init_scale) {
  if (n_levels < 1) throw std::invalid_argument("pyramid encoder: need at least one level");
  auto init = [&](Shape shape) {
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (double& x : v) x = rng.uniform(-init_scale, init_scale);
    return Tensor::param(std::move(shape), std::move(v));
  };
  PyramidEncoder enc;
  enc.stem_w = init({mid_channels, in_channels, 3, 3});
  enc.stem_b = init({mid_channels});
  for (int64_t j = 0; j + 1 < n_levels; ++j) {
    enc.down_w.push_back(init({mid_channels, mid_channels, 3, 3}));
    enc.down_b.push_back(init({mid_channels}));
  }
  const int64_t out_c = 3 * plane_channels;
  enc.psi_w.push_back(init({out_c, mid_channels, 3, 3}));
  enc.psi_b.push_back(init({out_c}));
  for (int64_t j = 1; j < n_levels; ++j) {
    enc.psi_w.push_back(init({out_c, mid_channels + out_c, 3, 3}));
    enc.psi_b.push_back(init({out_c}));
  }
  return enc;
}

MultiScaleTriPlane build_pyramid_encoder_mode(const PyramidEncoder& enc, const Tensor& source_image,
                                              int64_t coarsest_res, double extent, const Mat3& R_src,
                                              const Vec3& t_src) {
  const int64_t n = enc.n_levels();
  if (!source_image.defined() || source_image.ndim() != 3 || source_image.dim(1) != source_image.dim(2)) {
    throw std::invalid_argument("build_pyramid: source image must be square [C,H,H]");
  }
  const int64_t finest = coarsest_res << (n - 1);
  if (source_image.dim(1) != finest) {
    throw std::invalid_argument("build_pyramid: source image side " + std::to_string(source_image.dim(1)) +
                                " does not match finest level resolution " + std::to_string(finest));
  }

  // Feature pyramid, finest first.
  std::vector<Tensor> fine_to_coarse;
  Tensor feat = leaky_relu(conv2d(source_image, enc.stem_w, enc.stem_b, 1, 1), enc.leak);
  fine_to_coarse.push_back(feat);
  for (int64_t j = 0; j + 1 < n; ++j) {
    feat = leaky_relu(conv2d(feat, enc.down_w[static_cast<size_t>(j)], enc.down_b[static_cast<size_t>(j)], 2, 1),
                      enc.leak);
    fine_to_coarse.push_back(feat);
  }

  const int64_t plane_c = enc.psi_w[0].dim(0) / 3;
  MultiScaleTriPlane ms;
  TriPlaneLevel prev;
  for (int64_t j = 0; j < n; ++j) {
    const Tensor& m = fine_to_coarse[static_cast<size_t>(n - 1 - j)];
    Tensor input = m;
    if (j > 0) {
      input = concat_channels(
          {m, upsample2x_nearest(prev.xy), upsample2x_nearest(prev.xz), upsample2x_nearest(prev.yz)});
    }
    Tensor stack =
        conv2d(input, enc.psi_w[static_cast<size_t>(j)], enc.psi_b[static_cast<size_t>(j)], 1, 1);
    TriPlaneLevel level;
    level.xy = slice_dim0(stack, 0, plane_c);
    level.xz = slice_dim0(stack, plane_c, 2 * plane_c);
    level.yz = slice_dim0(stack, 2 * plane_c, 3 * plane_c);
    level.extent = extent;
    prev = level;
    ms.levels.push_back(camera_to_world_planes(level, R_src, t_src));
  }
  ms.validate();
  return ms;
}

void put_planes(Checkpoint& ckpt, const MultiScaleTriPlane& ms) {
  ms.validate();
  for (size_t j = 0; j < ms.levels.size(); ++j) {
    const std::string prefix = "level" + std::to_string(j) + ".plane";
    ckpt.put(prefix + "xy", ms.levels[j].xy);
    ckpt.put(prefix + "xz", ms.levels[j].xz);
    ckpt.put(prefix + "yz", ms.levels[j].yz);
  }
}

MultiScaleTriPlane planes_from_checkpoint(const Checkpoint& ckpt, double extent) {
  MultiScaleTriPlane ms;
  for (size_t j = 0;; ++j) {
    const std::string prefix = "level" + std::to_string(j) + ".plane";
    if (!ckpt.has(prefix + "xy")) break;
    TriPlaneLevel level;
    level.xy = ckpt.require(prefix + "xy");
    level.xz = ckpt.require(prefix + "xz");
    level.yz = ckpt.require(prefix + "yz");
    level.extent = extent;
    ms.levels.push_back(level);
  }
  ms.validate();
  return ms;
}

}  // namespace tpdr
