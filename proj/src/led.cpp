#include "led.hpp"
#include "errors.hpp"

#include <cmath>
#include <stdexcept>

#include "checkpoint.hpp"
#include "ops.hpp"
#include "rng.hpp"

namespace tpdr {

namespace {

constexpr int kKernel = 3;

ConvLayer make_layer(Rng& rng, int64_t c_in, int64_t c_out, double scale) {
  std::vector<double> w(static_cast<size_t>(c_out) * c_in * kKernel * kKernel);
  const double s = scale / std::sqrt(static_cast<double>(c_in) * kKernel * kKernel);
  for (double& v : w) v = rng.uniform(-s, s);
  ConvLayer layer;
  layer.w = Tensor::param({c_out, c_in, kKernel, kKernel}, std::move(w));
  // Nonzero bias: flat image regions (SECC background) would otherwise sit
  // exactly on the leaky-relu kink, where gradients are ill-conditioned.
  layer.b = Tensor::param({c_out}, std::vector<double>(c_out, 0.01));
  return layer;
}

Tensor run_stack(const std::vector<ConvLayer>& stack, Tensor x, double leak, bool linear_last) {
  for (size_t i = 0; i < stack.size(); ++i) {
    x = conv2d(x, stack[i].w, stack[i].b, 1, 1);
    if (!linear_last || i + 1 < stack.size()) x = leaky_relu(x, leak);
  }
  return x;
}

void validate_stack(const std::vector<ConvLayer>& stack, int64_t c_in, const char* name) {
  if (stack.empty() || stack.size() > 4) {
    throw std::invalid_argument(std::string("led: ") + name + " stack must have 1..4 layers");
  }
  for (const ConvLayer& layer : stack) {
    if (layer.w.ndim() != 4 || layer.b.ndim() != 1 || layer.w.dim(0) != layer.b.dim(0)) {
      throw std::invalid_argument(std::string("led: malformed layer in ") + name);
    }
    if (layer.w.dim(1) != c_in) {
      throw std::invalid_argument(std::string("led: ") + name + " layer expects " +
                                  std::to_string(layer.w.dim(1)) + " input channels, got " +
                                  std::to_string(c_in));
    }
    c_in = layer.w.dim(0);
  }
}

}  // namespace

void LedParams::validate() const {
  if (n_samples <= 0) throw std::invalid_argument("led: n_samples must be positive");
  validate_stack(expr, 6, "expr");
  validate_stack(pos, 3 * static_cast<int64_t>(n_samples), "pos");
  const int64_t expr_out = expr.back().w.dim(0);
  const int64_t pos_out = pos.back().w.dim(0);
  validate_stack(dec, expr_out + pos_out, "dec");
  if (dec.back().w.dim(0) != 3 * static_cast<int64_t>(n_samples)) {
    throw std::invalid_argument("led: decoder must emit 3*n_samples channels");
  }
}

std::vector<std::pair<std::string, Tensor>> LedParams::parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto emit = [&](const std::vector<ConvLayer>& stack, const std::string& name) {
    for (size_t i = 0; i < stack.size(); ++i) {
      out.emplace_back("led." + name + ".layer" + std::to_string(i) + ".w", stack[i].w);
      out.emplace_back("led." + name + ".layer" + std::to_string(i) + ".b", stack[i].b);
    }
  };
  emit(expr, "expr");
  emit(pos, "pos");
  emit(dec, "dec");
  return out;
}

LedParams make_led(int n_samples, int channels, int expr_layers, int pos_layers, int dec_layers,
                   uint64_t seed) {
  if (channels <= 0) throw std::invalid_argument("make_led: channels must be positive");
  LedParams params;
  params.n_samples = n_samples;
  Rng rng(seed);
  auto build = [&](std::vector<ConvLayer>& stack, int n_layers, int64_t c_in, int64_t c_out,
                   double out_scale) {
    for (int i = 0; i < n_layers; ++i) {
      const int64_t ci = i == 0 ? c_in : channels;
      const int64_t co = i == n_layers - 1 ? c_out : channels;
      stack.push_back(make_layer(rng, ci, co, i == n_layers - 1 ? out_scale : 1.0));
    }
  };
  build(params.expr, expr_layers, 6, channels, 1.0);
  build(params.pos, pos_layers, 3 * static_cast<int64_t>(n_samples), channels, 1.0);
  // Small but nonzero output layer: fresh models deform a little, which keeps
  // "trained deformation shrinks under the L1 penalty" a meaningful claim.
  build(params.dec, dec_layers, 2 * static_cast<int64_t>(channels),
        3 * static_cast<int64_t>(n_samples), 0.05);
  // The output layer is linear, so the kink-avoidance bias the hidden layers
  // need would only shift every offset coherently; that inflates sum|delta| by
  // the full pixel count and makes its gradient on this bias scale the same
  // way, which destabilizes momentum updates at large resolutions. Zero it so
  // initial offsets are small with incoherent signs.
  ConvLayer& out = params.dec.back();
  out.b = Tensor::param({out.b.numel()}, std::vector<double>(static_cast<size_t>(out.b.numel()), 0.0));
  params.validate();
  return params;
}

Tensor encode_expression(const LedParams& params, const Tensor& secc_pair) {
  params.validate();
  if (secc_pair.ndim() != 3 || secc_pair.dim(0) != 6) {
    throw std::invalid_argument("encode_expression: input must be [6,H,W], got " +
                                shape_str(secc_pair.shape()));
  }
  return run_stack(params.expr, secc_pair, params.leak, false);
}

Tensor encode_positions(const LedParams& params, const PointBatch& points) {
  params.validate();
  if (points.n_samples != params.n_samples) {
    throw std::invalid_argument("encode_positions: point batch has " +
                                std::to_string(points.n_samples) + " samples per ray, led expects " +
                                std::to_string(params.n_samples));
  }
  return run_stack(params.pos, points.positions_chw(), params.leak, false);
}

Tensor predict_deformation(const LedParams& params, const Tensor& expr_latent,
                           const Tensor& pos_latent) {
  params.validate();
  if (expr_latent.ndim() != 3 || pos_latent.ndim() != 3 ||
      expr_latent.dim(1) != pos_latent.dim(1) || expr_latent.dim(2) != pos_latent.dim(2)) {
    throw std::invalid_argument("predict_deformation: latent spatial sizes differ: " +
                                shape_str(expr_latent.shape()) + " vs " +
                                shape_str(pos_latent.shape()));
  }
  const Tensor joint = concat_channels({expr_latent, pos_latent});
  const Tensor out = run_stack(params.dec, joint, params.leak, true);  // [3N,H,W]
  const int64_t h = out.dim(1), w = out.dim(2), n = params.n_samples;
  return reshape(chw_points_to_rows(out, n), {h, w, n, 3});
}

PointBatch perturb_points(const PointBatch& points, double sigma, uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("perturb_points: sigma must be nonnegative");
  if (sigma == 0.0) return points;
  PointBatch noisy = points;
  Rng rng(seed);
  for (double& v : noisy.positions) v += sigma * rng.normal();
  return noisy;
}

Tensor deformation_l1(const Tensor& delta) { return sum(abs(delta)); }

DeformationBatch apply_deformation(const LedParams& params, const PointBatch& p_original,
                                   const Tensor& secc_pair, double sigma_perturb,
                                   uint64_t perturb_seed) {
  DeformationBatch out;
  out.p_original = p_original;
  const PointBatch& led_view =
      sigma_perturb > 0.0 ? perturb_points(p_original, sigma_perturb, perturb_seed) : p_original;
  const Tensor expr_latent = encode_expression(params, secc_pair);
  const Tensor pos_latent = encode_positions(params, led_view);
  out.delta = predict_deformation(params, expr_latent, pos_latent);
  const double* dd = out.delta.data();
  for (int64_t i = 0; i < out.delta.numel(); ++i) {
    if (!std::isfinite(dd[i])) {
      throw NumericError("deformation produced a non-finite offset");
    }
  }
  const int64_t rows = static_cast<int64_t>(p_original.height) * p_original.width *
                       p_original.n_samples;
  // Offsets land on the original points even when the encoders saw noise.
  out.deformed_rows = add(p_original.positions_rows(), reshape(out.delta, {rows, 3}));
  return out;
}

void put_led(Checkpoint& ckpt, const LedParams& params) {
  params.validate();
  for (const auto& [name, tensor] : params.parameters()) ckpt.put(name, tensor);
}

LedParams led_from_checkpoint(const Checkpoint& ckpt) {
  LedParams params;
  auto read_stack = [&](std::vector<ConvLayer>& stack, const std::string& name) {
    for (int i = 0;; ++i) {
      const std::string base = "led." + name + ".layer" + std::to_string(i);
      const Tensor* w = ckpt.find(base + ".w");
      if (w == nullptr) break;
      ConvLayer layer;
      layer.w = *w;
      layer.b = ckpt.require(base + ".b");
      layer.w.set_requires_grad(true);
      layer.b.set_requires_grad(true);
      stack.push_back(layer);
    }
    if (stack.empty()) {
      throw ParseError("checkpoint: missing led." + name + " layers");
    }
  };
  read_stack(params.expr, "expr");
  read_stack(params.pos, "pos");
  read_stack(params.dec, "dec");
  params.n_samples = static_cast<int>(params.dec.back().w.dim(0) / 3);
  params.validate();
  return params;
}

}  // namespace tpdr
