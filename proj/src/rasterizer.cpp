#include "rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "image_io.hpp"

namespace tpdr {

namespace {

constexpr double kMinDepth = 1e-9;

double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// With +y down and vertices ordered so the doubled signed area is positive, a
// boundary pixel belongs to the triangle iff the zero edge is a top edge
// (horizontal, pointing +x) or a left edge (pointing -y).
bool top_left(double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

}  // namespace

SECCImage render_secc(const MorphableModel& model, const FaceCoefficients& coeffs,
                      const Camera& cam) {
  validate_camera(cam);
  model.validate();
  const std::vector<double> verts = compute_vertices(model, coeffs);
  const int64_t n_verts = model.n_vertices;
  std::vector<Projected> proj(n_verts);
  for (int64_t v = 0; v < n_verts; ++v) {
    proj[v] = project_point(cam, {verts[v * 3], verts[v * 3 + 1], verts[v * 3 + 2]});
  }

  SECCImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(static_cast<size_t>(cam.width) * cam.height * 3, 0.0);
  img.mask.assign(static_cast<size_t>(cam.width) * cam.height, 0);
  img.depth.assign(static_cast<size_t>(cam.width) * cam.height,
                   std::numeric_limits<double>::infinity());

  bool any_in_frustum = false;
  const int64_t n_tris = model.n_triangles();
  for (int64_t t = 0; t < n_tris; ++t) {
    int64_t i0 = model.triangles[t * 3], i1 = model.triangles[t * 3 + 1],
            i2 = model.triangles[t * 3 + 2];
    if (proj[i0].z <= kMinDepth || proj[i1].z <= kMinDepth || proj[i2].z <= kMinDepth) continue;
    double area2 =
        edge_fn(proj[i0].x, proj[i0].y, proj[i1].x, proj[i1].y, proj[i2].x, proj[i2].y);
    if (area2 == 0.0) continue;
    if (area2 < 0.0) {
      std::swap(i1, i2);
      area2 = -area2;
    }
    const Projected &p0 = proj[i0], &p1 = proj[i1], &p2 = proj[i2];
    const double minx = std::min({p0.x, p1.x, p2.x}), maxx = std::max({p0.x, p1.x, p2.x});
    const double miny = std::min({p0.y, p1.y, p2.y}), maxy = std::max({p0.y, p1.y, p2.y});
    const int x_lo = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
    const int x_hi = std::min(cam.width - 1, static_cast<int>(std::floor(maxx - 0.5)));
    const int y_lo = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
    const int y_hi = std::min(cam.height - 1, static_cast<int>(std::floor(maxy - 0.5)));
    if (x_lo > x_hi || y_lo > y_hi) continue;
    any_in_frustum = true;
    for (int y = y_lo; y <= y_hi; ++y) {
      const double py = y + 0.5;
      for (int x = x_lo; x <= x_hi; ++x) {
        const double px = x + 0.5;
        const double w0 = edge_fn(p1.x, p1.y, p2.x, p2.y, px, py);
        const double w1 = edge_fn(p2.x, p2.y, p0.x, p0.y, px, py);
        const double w2 = edge_fn(p0.x, p0.y, p1.x, p1.y, px, py);
        const bool in0 = w0 > 0.0 || (w0 == 0.0 && top_left(p1.x, p1.y, p2.x, p2.y));
        const bool in1 = w1 > 0.0 || (w1 == 0.0 && top_left(p2.x, p2.y, p0.x, p0.y));
        const bool in2 = w2 > 0.0 || (w2 == 0.0 && top_left(p0.x, p0.y, p1.x, p1.y));
        if (!in0 || !in1 || !in2) continue;
        const double l0 = w0 / area2, l1 = w1 / area2, l2 = w2 / area2;
        const double z = l0 * p0.z + l1 * p1.z + l2 * p2.z;
        const size_t pix = static_cast<size_t>(y) * cam.width + x;
        if (z < img.depth[pix]) {
          img.depth[pix] = z;
          img.mask[pix] = 1;
          for (int a = 0; a < 3; ++a) {
            img.rgb[pix * 3 + a] = l0 * model.ncc[i0 * 3 + a] + l1 * model.ncc[i1 * 3 + a] +
                                   l2 * model.ncc[i2 * 3 + a];
          }
        }
      }
    }
  }
  if (!any_in_frustum) {
    throw std::invalid_argument("render_secc: no triangle in frustum");
  }
  return img;
}

std::pair<SECCImage, SECCImage> make_secc_pair(const MorphableModel& model,
                                               const std::vector<double>& z_shp_src,
                                               const std::vector<double>& z_exp_dri,
                                               const Camera& cam_frontal) {
  FaceCoefficients dri;
  dri.z_shp = z_shp_src;
  dri.z_exp = z_exp_dri;
  FaceCoefficients can;
  can.z_shp = z_shp_src;
  can.z_exp.assign(z_exp_dri.size(), 0.0);
  return {render_secc(model, dri, cam_frontal), render_secc(model, can, cam_frontal)};
}

Tensor secc_pair_tensor(const SECCImage& dri, const SECCImage& can) {
  if (dri.width != can.width || dri.height != can.height) {
    throw std::invalid_argument("secc_pair_tensor: image sizes differ");
  }
  const int64_t h = dri.height, w = dri.width;
  std::vector<double> data(static_cast<size_t>(6) * h * w);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const size_t pix = static_cast<size_t>(y) * w + x;
      for (int a = 0; a < 3; ++a) {
        data[(static_cast<size_t>(a) * h + y) * w + x] = dri.rgb[pix * 3 + a];
        data[(static_cast<size_t>(a + 3) * h + y) * w + x] = can.rgb[pix * 3 + a];
      }
    }
  }
  return Tensor::from_data({6, h, w}, data);
}

void save_secc(const SECCImage& image, const std::string& ppm_path, const std::string& pgm_path) {
  write_ppm(ppm_path, image.rgb, image.width, image.height);
  std::vector<double> gray(image.mask.size());
  for (size_t i = 0; i < gray.size(); ++i) gray[i] = image.mask[i] ? 1.0 : 0.0;
  write_pgm(pgm_path, gray, image.width, image.height);
}

}  // namespace tpdr
