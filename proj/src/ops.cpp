#include "ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace tpdr {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(static_cast<size_t>(a.numel()));
  const double* pa = a.data();
  const double* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  return make_op("add", {a, b}, a.shape(), std::move(out), [a, b](const Tensor& o) mutable {
    const auto& g = o.grad();
    if (a.requires_grad()) {
      auto& ga = a.grad_accum();
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_accum();
      for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(static_cast<size_t>(a.numel()));
  const double* pa = a.data();
  const double* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  return make_op("sub", {a, b}, a.shape(), std::move(out), [a, b](const Tensor& o) mutable {
    const auto& g = o.grad();
    if (a.requires_grad()) {
      auto& ga = a.grad_accum();
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_accum();
      for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(static_cast<size_t>(a.numel()));
  const double* pa = a.data();
  const double* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  return make_op("mul", {a, b}, a.shape(), std::move(out), [a, b](const Tensor& o) mutable {
    const auto& g = o.grad();
    const double* pa = a.data();
    const double* pb = b.data();
    if (a.requires_grad()) {
      auto& ga = a.grad_accum();
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * pb[i];
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_accum();
      for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * pa[i];
    }
  });
}

Tensor mul_scalar(const Tensor& a, double c) {
  std::vector<double> out(static_cast<size_t>(a.numel()));
  const double* pa = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * c;
  return make_op("mul_scalar", {a}, a.shape(), std::move(out), [a, c](const Tensor& o) mutable {
    if (!a.requires_grad()) return;
    const auto& g = o.grad();
    auto& ga = a.grad_accum();
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * c;
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(static_cast<size_t>(a.numel()));
  const double* pa = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + c;
  return make_op("add_scalar", {a}, a.shape(), std::move(out), [a](const Tensor& o) mutable {
    if (!a.requires_grad()) return;
    const auto& g = o.grad();
    auto& ga = a.grad_accum();
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      if (av == 0.0) continue;
      const double* brow = pb + kk * n;
      double* orow = out.data() + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_op("matmul", {a, b}, {m, n}, std::move(out), [a, b, m, k, n](const Tensor& o) mutable {
    const auto& g = o.grad();
    const double* pa = a.data();
    const double* pb = b.data();
    if (a.requires_grad()) {
      auto& ga = a.grad_accum();
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          const double* grow = g.data() + i * n;
          const double* brow = pb + kk * n;
          for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[static_cast<size_t>(i * k + kk)] += acc;
        }
      }
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_accum();
      for (int64_t i = 0; i < m; ++i) {
        const double* grow = g.data() + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
          const double av = pa[i * k + kk];
          if (av == 0.0) continue;
          double* gbrow = gb.data() + kk * n;
          for (int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  if (x.ndim() != 2 || bias.ndim() != 1 || x.dim(1) != bias.dim(0)) {
    throw std::invalid_argument("add_rowvec: shape mismatch " + shape_str(x.shape()) + " vs " +
                                shape_str(bias.shape()));
  }
  const int64_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(static_cast<size_t>(r * c));
  const double* px = x.data();
  const double* pb = bias.data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(i * c + j)] = px[i * c + j] + pb[j];
  return make_op("add_rowvec", {x, bias}, x.shape(), std::move(out), [x, bias, r, c](const Tensor& o) mutable {
    const auto& g = o.grad();
    if (x.requires_grad()) {
      auto& gx = x.grad_accum();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    }
    if (bias.requires_grad()) {
      auto& gb = bias.grad_accum();
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) gb[static_cast<size_t>(j)] += g[static_cast<size_t>(i * c + j)];
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  if (x.ndim() != 3 || w.ndim() != 4 || x.dim(0) != w.dim(1)) {
    throw std::invalid_argument("conv2d: shape mismatch input " + shape_str(x.shape()) + " weight " +
                                shape_str(w.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
  const int64_t ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int64_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != co)) {
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                                std::to_string(co) + " output channels");
  }
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) {
    throw std::invalid_argument("conv2d: kernel " + shape_str(w.shape()) + " too large for input " +
                                shape_str(x.shape()));
  }

  std::vector<double> out(static_cast<size_t>(co * ho * wo), 0.0);
  const double* px = x.data();
  const double* pw = w.data();
  for (int64_t oc = 0; oc < co; ++oc) {
    const double b = bias.defined() ? bias.data()[oc] : 0.0;
    for (int64_t oy = 0; oy < ho; ++oy) {
      for (int64_t ox = 0; ox < wo; ++ox) {
        double acc = b;
        for (int64_t ic = 0; ic < ci; ++ic) {
          for (int64_t ky = 0; ky < kh; ++ky) {
            const int64_t iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < kw; ++kx) {
              const int64_t ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= wd) continue;
              acc += px[(ic * h + iy) * wd + ix] * pw[((oc * ci + ic) * kh + ky) * kw + kx];
            }
          }
        }
        out[static_cast<size_t>((oc * ho + oy) * wo + ox)] = acc;
      }
    }
  }

  return make_op("conv2d", {x, w, bias}, {co, ho, wo}, std::move(out),
                 [x, w, bias, stride, pad, ci, h, wd, co, kh, kw, ho, wo](const Tensor& o) mutable {
                   const auto& g = o.grad();
                   const double* px = x.data();
                   const double* pw = w.data();
                   const bool need_x = x.requires_grad();
                   const bool need_w = w.requires_grad();
                   const bool need_b = bias.defined() && bias.requires_grad();
                   double* gx = need_x ? x.grad_accum().data() : nullptr;
                   double* gw = need_w ? w.grad_accum().data() : nullptr;
                   double* gb = need_b ? bias.grad_accum().data() : nullptr;
                   for (int64_t oc = 0; oc < co; ++oc) {
                     for (int64_t oy = 0; oy < ho; ++oy) {
                       for (int64_t ox = 0; ox < wo; ++ox) {
                         const double go = g[static_cast<size_t>((oc * ho + oy) * wo + ox)];
                         if (go == 0.0) continue;
                         if (gb) gb[oc] += go;
                         for (int64_t ic = 0; ic < ci; ++ic) {
                           for (int64_t ky = 0; ky < kh; ++ky) {
                             const int64_t iy = oy * stride + ky - pad;
                             if (iy < 0 || iy >= h) continue;
                             for (int64_t kx = 0; kx < kw; ++kx) {
                               const int64_t ix = ox * stride + kx - pad;
                               if (ix < 0 || ix >= wd) continue;
                               const int64_t xi = (ic * h + iy) * wd + ix;
                               const int64_t wi = ((oc * ci + ic) * kh + ky) * kw + kx;
                               if (gx) gx[xi] += go * pw[wi];
                               if (gw) gw[wi] += go * px[xi];
                             }
                           }
                         }
                       }
                     }
                   }
                 });
}

Tensor leaky_relu(const Tensor& x, double alpha) {
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* px = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = px[i] > 0.0 ? px[i] : alpha * px[i];
  return make_op("leaky_relu", {x}, x.shape(), std::move(out), [x, alpha](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const auto& g = o.grad();
    const double* px = x.data();
    auto& gx = x.grad_accum();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (px[i] > 0.0 ? 1.0 : alpha);
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* px = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-px[i]));
  return make_op("sigmoid", {x}, x.shape(), std::move(out), [x](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const auto& g = o.grad();
    const double* po = o.data();
    auto& gx = x.grad_accum();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * po[i] * (1.0 - po[i]);
  });
}

Tensor softplus(const Tensor& x) {
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* px = x.data();
  for (size_t i = 0; i < out.size(); ++i) {
    const double v = px[i];
    out[i] = v > 30.0 ? v : std::log1p(std::exp(v));
  }
  return make_op("softplus", {x}, x.shape(), std::move(out), [x](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const auto& g = o.grad();
    const double* px = x.data();
    auto& gx = x.grad_accum();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] / (1.0 + std::exp(-px[i]));
  });
}

Tensor abs(const Tensor& x) {
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* px = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::abs(px[i]);
  return make_op("abs", {x}, x.shape(), std::move(out), [x](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const auto& g = o.grad();
    const double* px = x.data();
    auto& gx = x.grad_accum();
    for (size_t i = 0; i < gx.size(); ++i) {
      if (px[i] > 0.0)
        gx[i] += g[i];
      else if (px[i] < 0.0)
        gx[i] -= g[i];
    }
  });
}

Tensor upsample2x_nearest(const Tensor& x) {
  if (x.ndim() != 3) throw std::invalid_argument("upsample2x_nearest: expected [C,H,W], got " + shape_str(x.shape()));
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> out(static_cast<size_t>(c * 4 * h * w));
  const double* px = x.data();
  for (int64_t ic = 0; ic < c; ++ic)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) {
        const double v = px[(ic * h + y) * w + xx];
        const int64_t base = (ic * 2 * h + 2 * y) * 2 * w + 2 * xx;
        out[static_cast<size_t>(base)] = v;
        out[static_cast<size_t>(base + 1)] = v;
        out[static_cast<size_t>(base + 2 * w)] = v;
        out[static_cast<size_t>(base + 2 * w + 1)] = v;
      }
  return make_op("upsample2x_nearest", {x}, {c, 2 * h, 2 * w}, std::move(out),
                 [x, c, h, w](const Tensor& o) mutable {
                   if (!x.requires_grad()) return;
                   const auto& g = o.grad();
                   auto& gx = x.grad_accum();
                   for (int64_t ic = 0; ic < c; ++ic)
                     for (int64_t y = 0; y < h; ++y)
                       for (int64_t xx = 0; xx < w; ++xx) {
                         const int64_t base = (ic * 2 * h + 2 * y) * 2 * w + 2 * xx;
                         gx[static_cast<size_t>((ic * h + y) * w + xx)] +=
                             g[static_cast<size_t>(base)] + g[static_cast<size_t>(base + 1)] +
                             g[static_cast<size_t>(base + 2 * w)] + g[static_cast<size_t>(base + 2 * w + 1)];
                       }
                 });
}

Tensor concat(const std::vector<Tensor>& parts, int dim) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const int nd = parts[0].ndim();
  if (dim < 0 || dim >= nd) throw std::invalid_argument("concat: dim out of range");
  Shape out_shape = parts[0].shape();
  int64_t cat_total = 0;
  for (const Tensor& p : parts) {
    if (p.ndim() != nd) throw std::invalid_argument("concat: rank mismatch");
    for (int d = 0; d < nd; ++d) {
      if (d == dim) continue;
      if (p.dim(d) != out_shape[static_cast<size_t>(d)]) {
        throw std::invalid_argument("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                    shape_str(parts[0].shape()) + " on dim " + std::to_string(d));
      }
    }
    cat_total += p.dim(dim);
  }
  out_shape[static_cast<size_t>(dim)] = cat_total;

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < dim; ++d) outer *= out_shape[static_cast<size_t>(d)];
  for (int d = dim + 1; d < nd; ++d) inner *= out_shape[static_cast<size_t>(d)];

  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  const int64_t out_row = cat_total * inner;
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    const int64_t blk = p.dim(dim) * inner;
    const double* pp = p.data();
    for (int64_t r = 0; r < outer; ++r) {
      std::memcpy(out.data() + r * out_row + offset, pp + r * blk, static_cast<size_t>(blk) * sizeof(double));
    }
    offset += blk;
  }

  auto inputs = parts;
  return make_op("concat", inputs, std::move(out_shape), std::move(out),
                 [inputs, outer, inner, cat_total](const Tensor& o) mutable {
                   const auto& g = o.grad();
                   const int64_t out_row = cat_total * inner;
                   int64_t offset = 0;
                   for (Tensor& p : inputs) {
                     const int64_t pblk = p.numel() / outer;
                     if (p.requires_grad()) {
                       auto& gp = p.grad_accum();
                       for (int64_t r = 0; r < outer; ++r)
                         for (int64_t i = 0; i < pblk; ++i)
                           gp[static_cast<size_t>(r * pblk + i)] += g[static_cast<size_t>(r * out_row + offset + i)];
                     }
                     offset += pblk;
                   }
                 });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  for (const Tensor& p : parts) {
    if (p.defined() && p.ndim() != 3) {
      throw std::invalid_argument("concat_channels: expected [C,H,W], got " + shape_str(p.shape()));
    }
  }
  return concat(parts, 0);
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
  }
  std::vector<double> out(x.data(), x.data() + x.numel());
  return make_op("reshape", {x}, std::move(new_shape), std::move(out), [x](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const auto& g = o.grad();
    auto& gx = x.grad_accum();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  const double* px = x.data();
  for (int64_t i = 0; i < x.numel(); ++i) acc += px[i];
  return make_op("sum", {x}, {1}, {acc}, [x](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const double g = o.grad()[0];
    auto& gx = x.grad_accum();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Tensor mean(const Tensor& x) {
  const int64_t n = x.numel();
  double acc = 0.0;
  const double* px = x.data();
  for (int64_t i = 0; i < n; ++i) acc += px[i];
  return make_op("mean", {x}, {1}, {acc / static_cast<double>(n)}, [x, n](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const double g = o.grad()[0] / static_cast<double>(n);
    auto& gx = x.grad_accum();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1) {
  if (x.ndim() != 2 || c0 < 0 || c1 > x.dim(1) || c0 >= c1) {
    throw std::invalid_argument("slice_cols: invalid range [" + std::to_string(c0) + "," + std::to_string(c1) +
                                ") for " + shape_str(x.shape()));
  }
  const int64_t r = x.dim(0), c = x.dim(1), w = c1 - c0;
  std::vector<double> out(static_cast<size_t>(r * w));
  const double* px = x.data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < w; ++j) out[static_cast<size_t>(i * w + j)] = px[i * c + c0 + j];
  return make_op("slice_cols", {x}, {r, w}, std::move(out), [x, r, c, c0, w](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const auto& g = o.grad();
    auto& gx = x.grad_accum();
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < w; ++j) gx[static_cast<size_t>(i * c + c0 + j)] += g[static_cast<size_t>(i * w + j)];
  });
}

Tensor slice_dim0(const Tensor& x, int64_t i0, int64_t i1) {
  if (x.ndim() < 1 || i0 < 0 || i1 > x.dim(0) || i0 >= i1) {
    throw std::invalid_argument("slice_dim0: invalid range [" + std::to_string(i0) + "," + std::to_string(i1) +
                                ") for " + shape_str(x.shape()));
  }
  const int64_t block = x.numel() / x.dim(0);
  Shape out_shape = x.shape();
  out_shape[0] = i1 - i0;
  std::vector<double> out(static_cast<size_t>((i1 - i0) * block));
  std::memcpy(out.data(), x.data() + i0 * block, out.size() * sizeof(double));
  return make_op("slice_dim0", {x}, std::move(out_shape), std::move(out),
                 [x, i0, block](const Tensor& o) mutable {
                   if (!x.requires_grad()) return;
                   const auto& g = o.grad();
                   auto& gx = x.grad_accum();
                   for (size_t i = 0; i < g.size(); ++i) gx[static_cast<size_t>(i0 * block) + i] += g[i];
                 });
}

Tensor gather_rows(const Tensor& x, std::vector<int64_t> rows) {
  if (x.ndim() != 2) throw std::invalid_argument("gather_rows: expected matrix, got " + shape_str(x.shape()));
  const int64_t r = x.dim(0), c = x.dim(1);
  for (int64_t idx : rows) {
    if (idx < 0 || idx >= r) throw std::invalid_argument("gather_rows: row index " + std::to_string(idx) + " out of range");
  }
  const int64_t m = static_cast<int64_t>(rows.size());
  std::vector<double> out(static_cast<size_t>(m * c));
  const double* px = x.data();
  for (int64_t i = 0; i < m; ++i)
    std::memcpy(out.data() + i * c, px + rows[static_cast<size_t>(i)] * c, static_cast<size_t>(c) * sizeof(double));
  return make_op("gather_rows", {x}, {m, c}, std::move(out), [x, rows = std::move(rows), c](const Tensor& o) mutable {
    if (!x.requires_grad()) return;
    const auto& g = o.grad();
    auto& gx = x.grad_accum();
    for (size_t i = 0; i < rows.size(); ++i)
      for (int64_t j = 0; j < c; ++j) gx[static_cast<size_t>(rows[i] * c + j)] += g[i * static_cast<size_t>(c) + static_cast<size_t>(j)];
  });
}

Tensor chw_points_to_rows(const Tensor& x, int64_t n_samples) {
  if (x.ndim() != 3 || x.dim(0) != 3 * n_samples) {
    throw std::invalid_argument("chw_points_to_rows: expected [3N,H,W] with N=" + std::to_string(n_samples) +
                                ", got " + shape_str(x.shape()));
  }
  const int64_t h = x.dim(1), w = x.dim(2);
  const int64_t rows = h * w * n_samples;
  std::vector<double> out(static_cast<size_t>(rows * 3));
  const double* px = x.data();
  for (int64_t y = 0; y < h; ++y)
    for (int64_t xx = 0; xx < w; ++xx)
      for (int64_t s = 0; s < n_samples; ++s)
        for (int64_t a = 0; a < 3; ++a) {
          out[static_cast<size_t>((((y * w + xx) * n_samples + s) * 3) + a)] =
              px[((3 * s + a) * h + y) * w + xx];
        }
  return make_op("chw_points_to_rows", {x}, {rows, 3}, std::move(out),
                 [x, n_samples, h, w](const Tensor& o) mutable {
                   if (!x.requires_grad()) return;
                   const auto& g = o.grad();
                   auto& gx = x.grad_accum();
                   for (int64_t y = 0; y < h; ++y)
                     for (int64_t xx = 0; xx < w; ++xx)
                       for (int64_t s = 0; s < n_samples; ++s)
                         for (int64_t a = 0; a < 3; ++a) {
                           gx[static_cast<size_t>(((3 * s + a) * h + y) * w + xx)] +=
                               g[static_cast<size_t>((((y * w + xx) * n_samples + s) * 3) + a)];
                         }
                 });
}

}  // namespace tpdr
