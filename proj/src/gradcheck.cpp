#include "gradcheck.hpp"

#include <chrono>
#include <stdexcept>

#include "geometry.hpp"
#include "json.hpp"
#include "led.hpp"
#include "morphable.hpp"
#include "ops.hpp"
#include "rasterizer.hpp"
#include "renderer.hpp"
#include "rng.hpp"
#include "scene.hpp"
#include "triplane.hpp"

namespace tpdr {
namespace {

constexpr double kFdStep = 1e-5;

Tensor random_param(Rng& rng, Shape shape, double lo, double hi) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::param(std::move(shape), std::move(v));
}

Tensor random_fixed(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t = random_param(rng, std::move(shape), lo, hi);
  t.set_requires_grad(false);
  return t;
}

// Nonvanishing mixing weights make the loss sensitive to every output entry.
Tensor mix_weights(Rng& rng, int64_t n) {
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(0.5, 1.5) * (rng.below(2) == 0 ? 1.0 : -1.0);
  return Tensor::from_data({n}, std::move(v));
}

Tensor wsum(const Tensor& x, const Tensor& w) {
  return sum(mul(reshape(x, {x.numel()}), w));
}

using ParamList = std::vector<std::pair<std::string, Tensor>>;

GradcheckEntry timed_check(const std::string& component, const std::function<Tensor()>& f,
                           const ParamList& params) {
  GradcheckEntry entry;
  entry.component = component;
  const auto t0 = std::chrono::steady_clock::now();
  entry.report = finite_difference_check(f, params, kFdStep);
  entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return entry;
}

// A composite over the primitive op set. Activation inputs are offset away
// from the leaky-relu and abs kinks so central differences stay valid.
GradcheckEntry check_ops(uint64_t seed) {
  Rng rng(seed);
  const Tensor A = random_param(rng, {3, 4}, -0.8, 0.8);
  const Tensor B = random_param(rng, {4, 2}, -0.8, 0.8);
  const Tensor r = random_param(rng, {2}, -0.5, 0.5);
  const Tensor X = random_param(rng, {2, 6, 6}, -0.8, 0.8);
  const Tensor W = random_param(rng, {3, 2, 3, 3}, -0.25, 0.25);
  const Tensor bc = random_param(rng, {3}, -0.1, 0.1);
  const Tensor wt = mix_weights(rng, 6);
  const Tensor wg = mix_weights(rng, 6);
  const Tensor wu = mix_weights(rng, 3 * 12 * 12);
  const Tensor wc = mix_weights(rng, 4 * 2);

  const auto loss = [=]() {
    const Tensor t = sigmoid(add_rowvec(matmul(A, B), r));  // [3,2]
    const Tensor c = conv2d(X, W, bc, 1, 1);                // [3,6,6]
    const Tensor d = leaky_relu(add_scalar(c, 0.37), 0.2);
    const Tensor e = softplus(d);
    const Tensor u = upsample2x_nearest(abs(add_scalar(e, 0.2)));  // softplus > 0
    const Tensor stacked = concat({slice_dim0(t, 0, 2), gather_rows(t, {2, 0, 1}),
                                   mul_scalar(slice_cols(t, 0, 2), 0.5)},
                                  0);  // [2+3+3, 2] -> slice below
    Tensor out = wsum(t, wt);
    out = add(out, wsum(gather_rows(t, {2, 0, 1}), wg));
    out = add(out, wsum(u, wu));
    out = add(out, wsum(slice_dim0(stacked, 1, 5), wc));
    out = add(out, mul_scalar(mean(sub(t, mul(t, t))), 2.0));
    return out;
  };
  return timed_check("ops",  loss,
                     {{"A", A}, {"B", B}, {"r", r}, {"X", X}, {"W", W}, {"bc", bc}});
}

// Direct-mode plane parameters. The loss is linear in the plane values (the
// query points are fixed), so any query location is smooth.
GradcheckEntry check_planes(uint64_t seed) {
  Rng rng(seed);
  MultiScaleTriPlane ms;
  ms.levels.push_back(make_level(rng, 2, 4, 1.0, 0.5));
  ms.levels.push_back(make_level(rng, 3, 8, 1.0, 0.5));
  ParamList params;
  for (size_t j = 0; j < ms.levels.size(); ++j) {
    const std::string base = "level" + std::to_string(j) + ".plane";
    TriPlaneLevel& lv = ms.levels[j];
    for (Tensor* t : {&lv.xy, &lv.xz, &lv.yz}) t->set_requires_grad(true);
    params.push_back({base + "xy", lv.xy});
    params.push_back({base + "xz", lv.xz});
    params.push_back({base + "yz", lv.yz});
  }
  const Tensor points = random_fixed(rng, {40, 3}, -0.9, 0.9);
  const Tensor w = mix_weights(rng, 40 * 5);
  const auto loss = [=]() { return wsum(sample_multiscale(ms, points), w); };
  return timed_check("planes", loss, params);
}

// Pyramid feature extractor plus per-level plane decoders, identity pose.
GradcheckEntry check_encoder(uint64_t seed) {
  Rng rng(seed);
  const PyramidEncoder enc = make_pyramid_encoder(rng, 3, 4, 2, 2, 0.5);
  const Tensor img = random_fixed(rng, {3, 8, 8}, 0.0, 1.0);  // side = 4 * 2^(2-1)
  ParamList params = {{"encoder.stem.w", enc.stem_w}, {"encoder.stem.b", enc.stem_b}};
  for (size_t i = 0; i < enc.down_w.size(); ++i) {
    params.push_back({"encoder.down" + std::to_string(i) + ".w", enc.down_w[i]});
    params.push_back({"encoder.down" + std::to_string(i) + ".b", enc.down_b[i]});
  }
  for (size_t i = 0; i < enc.psi_w.size(); ++i) {
    params.push_back({"encoder.psi" + std::to_string(i) + ".w", enc.psi_w[i]});
    params.push_back({"encoder.psi" + std::to_string(i) + ".b", enc.psi_b[i]});
  }
  std::vector<Tensor> ws;
  for (const int64_t res : {4, 8}) ws.push_back(mix_weights(rng, 3 * 2 * res * res));
  const auto loss = [=]() {
    const MultiScaleTriPlane ms = build_pyramid_encoder_mode(enc, img, 4, 1.0, kIdentity3, {0, 0, 0});
    Tensor out;
    for (size_t j = 0; j < ms.levels.size(); ++j) {
      const Tensor planes = concat(
          {reshape(ms.levels[j].xy, {ms.levels[j].xy.numel()}),
           reshape(ms.levels[j].xz, {ms.levels[j].xz.numel()}),
           reshape(ms.levels[j].yz, {ms.levels[j].yz.numel()})},
          0);
      const Tensor term = sum(mul(planes, ws[j]));
      out = j == 0 ? term : add(out, term);
    }
    return out;
  };
  return timed_check("encoder", loss, params);
}

GradcheckEntry check_head(uint64_t seed) {
  Rng rng(seed);
  const RadianceHead head = make_radiance_head(10, 6, rng.below(1u << 31));
  const Tensor features = random_fixed(rng, {12, 7}, -1.0, 1.0);
  const Tensor gamma = random_fixed(rng, {12, 3}, -1.0, 1.0);
  const Tensor w_rgb = mix_weights(rng, 12 * 3);
  const Tensor w_sig = mix_weights(rng, 12);
  const auto loss = [=]() {
    const auto [rgb, sigma] = query_radiance(head, features, gamma);
    return add(wsum(rgb, w_rgb), wsum(sigma, w_sig));
  };
  return timed_check("head", loss, head.parameters());
}

// Deformation network on a real stratified point batch. Even sample count:
// an odd one puts a depth sample exactly on the z = 0 tri-plane node plane.
GradcheckEntry check_led(uint64_t seed) {
  Rng rng(seed);
  const LedParams led = make_led(4, 3, 2, 2, 2, rng.below(1u << 31));
  Camera cam;
  cam.width = cam.height = 6;
  cam.fx = cam.fy = 1.1 * 6;
  cam.cx = cam.cy = 3.0;
  cam.t = {0, 0, 2.5};
  const PointBatch points = stratified_sample(generate_rays(cam, 1.5, 3.5), 4, 0, false);
  const Tensor secc = random_fixed(rng, {6, 6, 6}, 0.0, 1.0);
  const Tensor w = mix_weights(rng, 6 * 6 * 4 * 3);
  const auto loss = [=]() {
    const DeformationBatch def = apply_deformation(led, points, secc, 0.0, 0);
    return wsum(def.delta, w);
  };
  return timed_check("led", loss, led.parameters());
}

// Every parameter group jointly through a full deformable render.
GradcheckEntry check_render(uint64_t seed) {
  const Scene scene = generate_scene("textured_head", 42 + seed, 8, 4);
  Rng rng(seed + 17);

  RenderScene rscene;
  rscene.planes.levels.push_back(make_level(rng, 2, 4, 1.0, 0.3));
  ParamList params;
  TriPlaneLevel& lv = rscene.planes.levels[0];
  for (Tensor* t : {&lv.xy, &lv.xz, &lv.yz}) t->set_requires_grad(true);
  params.push_back({"level0.planexy", lv.xy});
  params.push_back({"level0.planexz", lv.xz});
  params.push_back({"level0.planeyz", lv.yz});
  rscene.head = make_radiance_head(2 + 6, 4, rng.below(1u << 31));
  rscene.use_led = true;
  rscene.led = make_led(4, 2, 1, 1, 1, rng.below(1u << 31));
  const auto [dri, can] =
      make_secc_pair(scene.model, scene.z_shp, scene.targets[1].z_exp, scene.secc_camera);
  rscene.secc_pair = secc_pair_tensor(dri, can);
  for (const auto& p : rscene.head.parameters()) params.push_back(p);
  for (const auto& p : rscene.led.parameters()) params.push_back(p);

  RenderOptions opts;
  opts.n_samples = 4;
  opts.t_near = 1.5;
  opts.t_far = 3.5;
  opts.posenc_freqs = 1;
  const std::vector<int64_t> rays = {27, 28, 36};
  const Tensor w = mix_weights(rng, static_cast<int64_t>(rays.size()) * 4);
  const auto loss = [=, &scene]() {
    const RenderResult rr = render_rays(rscene, scene.targets[1].camera, opts, rays);
    return wsum(rr.rgb_alpha, w);
  };
  return timed_check("render", loss, params);
}

}  // namespace

const std::vector<std::string>& gradcheck_components() {
  static const std::vector<std::string> kComponents = {"ops",  "planes", "encoder",
                                                       "head", "led",    "render"};
  return kComponents;
}

std::vector<GradcheckEntry> run_gradcheck(const std::string& component, uint64_t seed) {
  const auto run_one = [&](const std::string& name) -> GradcheckEntry {
    if (name == "ops") return check_ops(seed);
    if (name == "planes") return check_planes(seed + 1);
    if (name == "encoder") return check_encoder(seed + 2);
    if (name == "head") return check_head(seed + 3);
    if (name == "led") return check_led(seed + 4);
    if (name == "render") return check_render(seed + 5);
    throw std::invalid_argument("gradcheck: unknown component '" + name + "'");
  };
  std::vector<GradcheckEntry> entries;
  if (component == "all") {
    for (const std::string& name : gradcheck_components()) entries.push_back(run_one(name));
  } else {
    entries.push_back(run_one(component));
  }
  return entries;
}

bool gradcheck_passed(const std::vector<GradcheckEntry>& entries) {
  if (entries.empty()) return false;
  for (const GradcheckEntry& e : entries) {
    if (!(e.report.max_rel_err < kGradcheckTolerance)) return false;
  }
  return true;
}

std::string gradcheck_report_json(const std::vector<GradcheckEntry>& entries) {
  nlohmann::json components = nlohmann::json::object();
  for (const GradcheckEntry& e : entries) {
    components[e.component] = {{"max_rel_err", e.report.max_rel_err},
                               {"entries", e.report.entries_checked},
                               {"worst_param", e.report.worst_param},
                               {"worst_index", e.report.worst_index},
                               {"seconds", e.seconds}};
  }
  const nlohmann::json report = {{"tolerance", kGradcheckTolerance},
                                 {"pass", gradcheck_passed(entries)},
                                 {"components", components}};
  return report.dump(2);
}

}  // namespace tpdr
