#pragma once

// Reference rasterizer for tests: per-pixel painter's algorithm. Every
// covering fragment is collected, sorted back-to-front, and painted with
// overwrite, so visibility is resolved by paint order instead of a depth
// buffer. Ties paint the higher triangle index first, which leaves the lower
// index on top, matching the strict less-than depth test. The coverage
// predicate must match the engine's decisions bit-for-bit for pixel-exact
// comparison, so it uses the same edge-function arithmetic; the independent
// part under test is visibility resolution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "geometry.hpp"
#include "morphable.hpp"
#include "rasterizer.hpp"

namespace oracle {

struct Fragment {
  double z;
  int64_t tri;
  double rgb[3];
};

inline double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

inline bool edge_top_left(double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

// All fragments covering the center of pixel (x, y), in triangle order.
inline std::vector<Fragment> pixel_fragments(const tpdr::MorphableModel& model,
                                             const std::vector<tpdr::Projected>& proj, int x,
                                             int y) {
  std::vector<Fragment> frags;
  const double px = x + 0.5, py = y + 0.5;
  for (int64_t t = 0; t < model.n_triangles(); ++t) {
    int64_t i0 = model.triangles[t * 3], i1 = model.triangles[t * 3 + 1],
            i2 = model.triangles[t * 3 + 2];
    if (proj[i0].z <= 1e-9 || proj[i1].z <= 1e-9 || proj[i2].z <= 1e-9) continue;
    double area2 = edge(proj[i0].x, proj[i0].y, proj[i1].x, proj[i1].y, proj[i2].x, proj[i2].y);
    if (area2 == 0.0) continue;
    if (area2 < 0.0) {
      std::swap(i1, i2);
      area2 = -area2;
    }
    const tpdr::Projected &p0 = proj[i0], &p1 = proj[i1], &p2 = proj[i2];
    const double w0 = edge(p1.x, p1.y, p2.x, p2.y, px, py);
    const double w1 = edge(p2.x, p2.y, p0.x, p0.y, px, py);
    const double w2 = edge(p0.x, p0.y, p1.x, p1.y, px, py);
    const bool in0 = w0 > 0.0 || (w0 == 0.0 && edge_top_left(p1.x, p1.y, p2.x, p2.y));
    const bool in1 = w1 > 0.0 || (w1 == 0.0 && edge_top_left(p2.x, p2.y, p0.x, p0.y));
    const bool in2 = w2 > 0.0 || (w2 == 0.0 && edge_top_left(p0.x, p0.y, p1.x, p1.y));
    if (!in0 || !in1 || !in2) continue;
    const double l0 = w0 / area2, l1 = w1 / area2, l2 = w2 / area2;
    Fragment f;
    f.z = l0 * p0.z + l1 * p1.z + l2 * p2.z;
    f.tri = t;
    for (int a = 0; a < 3; ++a) {
      f.rgb[a] = l0 * model.ncc[i0 * 3 + a] + l1 * model.ncc[i1 * 3 + a] +
                 l2 * model.ncc[i2 * 3 + a];
    }
    frags.push_back(f);
  }
  return frags;
}

inline tpdr::SECCImage painter_render(const tpdr::MorphableModel& model,
                                      const tpdr::FaceCoefficients& coeffs,
                                      const tpdr::Camera& cam) {
  const std::vector<double> verts = tpdr::compute_vertices(model, coeffs);
  std::vector<tpdr::Projected> proj(model.n_vertices);
  for (int64_t v = 0; v < model.n_vertices; ++v) {
    proj[v] = tpdr::project_point(cam, {verts[v * 3], verts[v * 3 + 1], verts[v * 3 + 2]});
  }
  tpdr::SECCImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(static_cast<size_t>(cam.width) * cam.height * 3, 0.0);
  img.mask.assign(static_cast<size_t>(cam.width) * cam.height, 0);
  img.depth.assign(static_cast<size_t>(cam.width) * cam.height,
                   std::numeric_limits<double>::infinity());
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      std::vector<Fragment> frags = pixel_fragments(model, proj, x, y);
      std::stable_sort(frags.begin(), frags.end(), [](const Fragment& a, const Fragment& b) {
        if (a.z != b.z) return a.z > b.z;
        return a.tri > b.tri;
      });
      const size_t pix = static_cast<size_t>(y) * cam.width + x;
      for (const Fragment& f : frags) {
        img.depth[pix] = f.z;
        img.mask[pix] = 1;
        for (int a = 0; a < 3; ++a) img.rgb[pix * 3 + a] = f.rgb[a];
      }
    }
  }
  return img;
}

// Bitwise comparison; returns the number of differing pixels.
inline int count_image_diffs(const tpdr::SECCImage& a, const tpdr::SECCImage& b) {
  if (a.width != b.width || a.height != b.height) return a.width * a.height + 1;
  int diffs = 0;
  for (size_t pix = 0; pix < a.mask.size(); ++pix) {
    bool same = a.mask[pix] == b.mask[pix];
    if (same && a.mask[pix]) {
      same = a.depth[pix] == b.depth[pix] && a.rgb[pix * 3] == b.rgb[pix * 3] &&
             a.rgb[pix * 3 + 1] == b.rgb[pix * 3 + 1] && a.rgb[pix * 3 + 2] == b.rgb[pix * 3 + 2];
    }
    if (!same) ++diffs;
  }
  return diffs;
}

}  // namespace oracle
