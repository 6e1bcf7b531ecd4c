#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "checkpoint.hpp"
#include "doctest.h"
#include "image_io.hpp"
#include "morphable.hpp"
#include "ops.hpp"
#include "rasterizer.hpp"
#include "renderer.hpp"
#include "rng.hpp"

using namespace tpdr;

namespace {

Tensor random_matrix(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data));
}

// Single-level planes holding one 30.0 spike at the center node; the field is
// nonzero only near the world origin.
MultiScaleTriPlane spike_planes() {
  auto plane = [] {
    std::vector<double> data(25, 0.0);
    data[2 * 5 + 2] = 30.0;
    return Tensor::param({1, 5, 5}, data);
  };
  TriPlaneLevel level;
  level.xy = plane();
  level.xz = plane();
  level.yz = plane();
  level.extent = 1.0;
  MultiScaleTriPlane ms;
  ms.levels.push_back(level);
  return ms;
}

// Head that forwards the single feature channel to softplus(F - 15): opaque
// where the field is strong, near-vacuum elsewhere. rgb is constant 0.5.
RadianceHead threshold_head() {
  RadianceHead head;
  head.w1 = Tensor::param({1, 1}, {1.0});
  head.b1 = Tensor::param({1}, {0.0});
  head.w2 = Tensor::param({1, 4}, {0.0, 0.0, 0.0, 1.0});
  head.b2 = Tensor::param({4}, {0.0, 0.0, 0.0, -15.0});
  return head;
}

Camera frontal_camera(int res) {
  Camera cam;
  cam.fx = cam.fy = 1.1 * res;
  cam.cx = cam.cy = res / 2.0;
  cam.width = cam.height = res;
  cam.t = {0.0, 0.0, 2.5};
  return cam;
}

RenderOptions basic_options(int n_samples = 32) {
  RenderOptions opts;
  opts.n_samples = n_samples;
  opts.t_near = 1.5;
  opts.t_far = 3.5;
  opts.posenc_freqs = 0;
  return opts;
}

double constant_medium_error(int n) {
  const double sigma = 2.0;
  std::vector<double> depths(n);
  for (int i = 0; i < n; ++i) depths[i] = 1.0 + (i + 0.5) / n;
  const Tensor rgb = Tensor::from_data({n, 3}, [&] {
    std::vector<double> d(static_cast<size_t>(n) * 3, 0.0);
    for (int i = 0; i < n; ++i) d[i * 3] = 1.0;
    return d;
  }());
  const Tensor sig = Tensor::full({n}, sigma);
  const Tensor out = integrate_ray(rgb, sig, depths, 2.0);
  const double analytic = 1.0 - std::exp(-2.0);
  return std::abs(out.data()[0] - analytic);
}

}  // namespace

TEST_CASE("zero-weight head yields rgb 0.5 and density softplus(0)") {
  RadianceHead head;
  head.w1 = Tensor::param({3, 4}, std::vector<double>(12, 0.0));
  head.b1 = Tensor::param({4}, std::vector<double>(4, 0.0));
  head.w2 = Tensor::param({4, 4}, std::vector<double>(16, 0.0));
  head.b2 = Tensor::param({4}, std::vector<double>(4, 0.0));
  const auto [rgb, sig] = query_radiance(head, random_matrix({5, 3}, 1), Tensor());
  for (int64_t i = 0; i < rgb.numel(); ++i) CHECK(rgb.data()[i] == 0.5);
  for (int64_t i = 0; i < sig.numel(); ++i) {
    CHECK(sig.data()[i] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
}

TEST_CASE("density is nonnegative and rgb in (0,1) for random inputs") {
  const RadianceHead head = make_radiance_head(8, 16, 3);
  const auto [rgb, sig] = query_radiance(head, random_matrix({10000, 8}, 4, -5.0, 5.0), Tensor());
  for (int64_t i = 0; i < sig.numel(); ++i) CHECK(sig.data()[i] >= 0.0);
  for (int64_t i = 0; i < rgb.numel(); ++i) {
    CHECK(rgb.data()[i] > 0.0);
    CHECK(rgb.data()[i] < 1.0);
  }
}

TEST_CASE("head rejects mismatched input width") {
  const RadianceHead head = make_radiance_head(8, 16, 3);
  CHECK_THROWS_AS(query_radiance(head, random_matrix({5, 7}, 1), Tensor()),
                  std::invalid_argument);
}

TEST_CASE("gradcheck: radiance head") {
  const RadianceHead head = make_radiance_head(6, 8, 5);
  const Tensor features = random_matrix({7, 6}, 6);
  const Tensor wr = random_matrix({7, 3}, 7);
  const Tensor ws = random_matrix({7, 1}, 8);
  const FdReport rep = finite_difference_check(
      [&]() {
        const auto [rgb, sig] = query_radiance(head, features, Tensor());
        return add(sum(mul(rgb, wr)), sum(mul(sig, ws)));
      },
      head.parameters(), 1e-5);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("vacuum ray: zero density gives black and zero alpha exactly") {
  const Tensor rgb = random_matrix({8, 3}, 9, 0.0, 1.0);
  const Tensor sig = Tensor::zeros({8});
  std::vector<double> depths(8);
  for (int i = 0; i < 8; ++i) depths[i] = 1.0 + 0.1 * i;
  const Tensor out = integrate_ray(rgb, sig, depths, 2.0);
  CHECK(out.data()[0] == 0.0);
  CHECK(out.data()[1] == 0.0);
  CHECK(out.data()[2] == 0.0);
  CHECK(out.data()[3] == 0.0);
}

TEST_CASE("constant medium matches the closed form and converges monotonically") {
  // sigma=2 red medium on t in [1,2]: analytic pixel = 1 - e^-2 = 0.8646647.
  const double err256 = constant_medium_error(256);
  CHECK(err256 < 1e-3);
  double prev = constant_medium_error(8);
  for (const int n : {16, 32, 64, 128, 256}) {
    const double err = constant_medium_error(n);
    CHECK(err < prev);
    prev = err;
  }
  // Green/blue stay black and alpha matches the analytic opacity closely.
  const Tensor rgb = Tensor::from_data({4, 3}, {1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0});
  const Tensor sig = Tensor::full({4}, 2.0);
  const Tensor out = integrate_ray(rgb, sig, {1.125, 1.375, 1.625, 1.875}, 2.0);
  CHECK(out.data()[1] == 0.0);
  CHECK(out.data()[2] == 0.0);
  CHECK(out.data()[3] == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(0.05));
}

TEST_CASE("single saturated sample returns its color with alpha 1") {
  const Tensor rgb = Tensor::from_data({1, 3}, {0.3, 0.7, 0.2});
  const Tensor sig = Tensor::from_data({1}, {1000.0});
  const Tensor out = integrate_ray(rgb, sig, {1.0}, 2.0);
  CHECK(out.data()[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(out.data()[1] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(out.data()[2] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(out.data()[3] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("energy bound: pixel below max sample color, alpha in [0,1]") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6;
    std::vector<double> c(static_cast<size_t>(n) * 3), s(n), depths(n);
    double cmax[3] = {0, 0, 0};
    double d = 0.5;
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) {
        c[i * 3 + a] = rng.uniform();
        cmax[a] = std::max(cmax[a], c[i * 3 + a]);
      }
      s[i] = rng.uniform(0.0, 5.0);
      d += rng.uniform(0.05, 0.4);
      depths[i] = d;
    }
    const Tensor out =
        integrate_ray(Tensor::from_data({n, 3}, c), Tensor::from_data({n}, s), depths, d + 0.3);
    for (int a = 0; a < 3; ++a) CHECK(out.data()[a] <= cmax[a] + 1e-12);
    CHECK(out.data()[3] >= 0.0);
    CHECK(out.data()[3] <= 1.0);
  }
}

TEST_CASE("splitting a segment with constant density preserves transmittance") {
  for (const double sigma : {0.3, 1.7, 4.0}) {
    const Tensor c1 = Tensor::from_data({1, 3}, {1.0, 1.0, 1.0});
    const Tensor one = integrate_ray(c1, Tensor::from_data({1}, {sigma}), {1.0}, 2.0);
    const Tensor c2 = Tensor::from_data({2, 3}, {1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
    const Tensor two =
        integrate_ray(c2, Tensor::from_data({2}, {sigma, sigma}), {1.0, 1.5}, 2.0);
    CHECK(std::abs(one.data()[3] - two.data()[3]) < 1e-12);
  }
}

TEST_CASE("composite rejects bad depth sequences") {
  const Tensor rgb = Tensor::zeros({3, 3});
  const Tensor sig = Tensor::zeros({3});
  CHECK_THROWS_AS(integrate_ray(rgb, sig, {1.0, 1.2, 1.1}, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate_ray(rgb, sig, {1.0, 1.2, 2.0}, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate_ray(rgb, sig, {1.0, 1.0, 1.5}, 2.0), std::invalid_argument);
}

TEST_CASE("gradcheck: compositing operator") {
  Rng rng(13);
  std::vector<double> data(2 * 4 * 4);
  for (size_t i = 0; i < data.size(); ++i) {
    data[i] = (i % 4 == 3) ? rng.uniform(0.1, 2.0) : rng.uniform(0.0, 1.0);
  }
  const Tensor rgb_sigma = Tensor::param({8, 4}, data);
  const std::vector<double> depths = {1.1, 1.3, 1.6, 1.9, 1.05, 1.45, 1.5, 1.95};
  const Tensor w = random_matrix({2, 4}, 14);
  const FdReport rep = finite_difference_check(
      [&]() { return sum(mul(composite_rays(rgb_sigma, depths, 2.0, 4), w)); },
      {{"rgb_sigma", rgb_sigma}}, 1e-5);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: one-pixel render loss against plane and head parameters") {
  MultiScaleTriPlane planes;
  TriPlaneLevel level;
  level.xy = random_matrix({2, 4, 4}, 21, -0.5, 0.5);
  level.xz = random_matrix({2, 4, 4}, 22, -0.5, 0.5);
  level.yz = random_matrix({2, 4, 4}, 23, -0.5, 0.5);
  for (Tensor* t : {&level.xy, &level.xz, &level.yz}) t->set_requires_grad(true);
  planes.levels.push_back(level);

  RenderScene scene;
  scene.planes = planes;
  scene.head = make_radiance_head(2 + 6, 4, 24);

  Camera cam;
  cam.fx = cam.fy = 4.0;
  cam.cx = cam.cy = 1.5;
  cam.width = cam.height = 3;
  cam.t = {0.0, 0.0, 2.5};

  RenderOptions opts = basic_options(4);
  opts.posenc_freqs = 1;

  std::vector<std::pair<std::string, Tensor>> params = {
      {"plane.xy", level.xy}, {"plane.xz", level.xz}, {"plane.yz", level.yz}};
  for (const auto& p : scene.head.parameters()) params.push_back(p);

  const Tensor w = random_matrix({1, 4}, 25);
  const FdReport rep = finite_difference_check(
      [&]() { return sum(mul(render_rays(scene, cam, opts, {4}).rgb_alpha, w)); }, params, 1e-5);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("zero deformation renders identically to the direct path") {
  const MorphableModel model = make_toy_head();
  const Camera cam = frontal_camera(8);
  const auto [dri, can] =
      make_secc_pair(model, std::vector<double>(model.n_shape, 0.0),
                     std::vector<double>(model.n_expr, 0.0), frontal_camera(16));

  RenderScene scene;
  scene.planes = spike_planes();
  scene.head = threshold_head();
  scene.use_led = true;
  scene.led = make_led(6, 4, 2, 2, 2, 31);
  scene.secc_pair = secc_pair_tensor(dri, can);
  // Zero the decoder output layer: the encoders still run, delta is 0.
  for (Tensor* t : {&scene.led.dec.back().w, &scene.led.dec.back().b}) {
    for (int64_t i = 0; i < t->numel(); ++i) t->data()[i] = 0.0;
  }

  const RenderOptions opts = basic_options(6);
  const RenderResult with_led = render_image(scene, cam, opts);
  REQUIRE(with_led.delta.defined());
  for (int64_t i = 0; i < with_led.delta.numel(); ++i) CHECK(with_led.delta.data()[i] == 0.0);

  scene.use_led = false;
  const RenderResult direct = render_image(scene, cam, opts);
  CHECK(!direct.delta.defined());
  REQUIRE(with_led.rgb_alpha.numel() == direct.rgb_alpha.numel());
  for (int64_t i = 0; i < direct.rgb_alpha.numel(); ++i) {
    CHECK(with_led.rgb_alpha.data()[i] == direct.rgb_alpha.data()[i]);
  }
}

TEST_CASE("centered density spike lights up the image center only") {
  RenderScene scene;
  scene.planes = spike_planes();
  scene.head = threshold_head();
  const Camera cam = frontal_camera(16);
  const RenderResult res = render_image(scene, cam, basic_options(32));
  const std::vector<double> alpha = res.alpha_image();
  CHECK(alpha[8 * 16 + 8] > 0.9);
  CHECK(alpha[0] < 0.01);
  CHECK(alpha[15] < 0.01);
  CHECK(alpha[15 * 16] < 0.01);
  CHECK(alpha[15 * 16 + 15] < 0.01);
  // Mass concentrated centrally: central 6x6 block beats the border ring.
  double center = 0.0, border = 0.0;
  int nc = 0, nb = 0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (y >= 5 && y < 11 && x >= 5 && x < 11) {
        center += alpha[y * 16 + x];
        ++nc;
      } else if (y == 0 || y == 15 || x == 0 || x == 15) {
        border += alpha[y * 16 + x];
        ++nb;
      }
    }
  }
  CHECK(center / nc > 100.0 * (border / nb + 1e-9));
}

TEST_CASE("render determinism: seeds reproduce, jitter seeds differ") {
  RenderScene scene;
  scene.planes = spike_planes();
  scene.head = threshold_head();
  const Camera cam = frontal_camera(8);
  RenderOptions opts = basic_options(8);
  opts.jitter = true;
  opts.seed = 5;
  const RenderResult a = render_image(scene, cam, opts);
  const RenderResult b = render_image(scene, cam, opts);
  REQUIRE(a.rgb_alpha.numel() == b.rgb_alpha.numel());
  bool same = true;
  for (int64_t i = 0; i < a.rgb_alpha.numel(); ++i) {
    same &= a.rgb_alpha.data()[i] == b.rgb_alpha.data()[i];
  }
  CHECK(same);
  opts.seed = 6;
  const RenderResult c = render_image(scene, cam, opts);
  bool all_equal = true;
  for (int64_t i = 0; i < a.rgb_alpha.numel(); ++i) {
    all_equal &= a.rgb_alpha.data()[i] == c.rgb_alpha.data()[i];
  }
  CHECK(!all_equal);
}

TEST_CASE("orbit: empty list, identity frame, and fixed-point deformation probe") {
  RenderScene scene;
  scene.planes = spike_planes();
  scene.head = threshold_head();
  const Camera base = frontal_camera(8);
  const RenderOptions opts = basic_options(8);

  CHECK(orbit_render(scene, base, {}, {}, opts).frames.empty());
  CHECK_THROWS_AS(orbit_render(scene, base, {0.1, 0.2}, {0.0}, opts), std::invalid_argument);

  const OrbitResult orbit = orbit_render(scene, base, {0.0, 0.3}, {}, opts);
  REQUIRE(orbit.frames.size() == 2);
  const RenderResult direct = render_image(scene, base, opts);
  for (int64_t i = 0; i < direct.rgb_alpha.numel(); ++i) {
    CHECK(orbit.frames[0].rgb_alpha.data()[i] == direct.rgb_alpha.data()[i]);
  }
  // The yawed camera still circles the origin at the same distance.
  const Vec3 c0 = camera_center(orbit.cameras[0]);
  const Vec3 c1 = camera_center(orbit.cameras[1]);
  const auto norm = [](const Vec3& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  };
  CHECK(norm(c1) == doctest::Approx(norm(c0)).epsilon(1e-12));
  CHECK(std::abs(c1[0] - c0[0]) > 0.1);

  // Deformation at fixed world points does not depend on the view: same
  // points, same SECC pair, bitwise equal offsets after rendering any orbit.
  const MorphableModel model = make_toy_head();
  const auto [dri, can] =
      make_secc_pair(model, std::vector<double>(model.n_shape, 0.0),
                     std::vector<double>(model.n_expr, 0.0), frontal_camera(16));
  const LedParams led = make_led(4, 4, 2, 2, 2, 77);
  PointBatch probe;
  probe.height = probe.width = 4;
  probe.n_samples = 4;
  probe.positions.resize(4 * 4 * 4 * 3);
  probe.depths.resize(4 * 4 * 4);
  Rng rng(78);
  for (double& v : probe.positions) v = rng.uniform(-0.5, 0.5);
  for (size_t r = 0; r < 16; ++r) {
    for (int i = 0; i < 4; ++i) probe.depths[r * 4 + i] = 1.0 + 0.2 * i;
  }
  const Tensor pair16 = secc_pair_tensor(dri, can);
  const Tensor pair4 = Tensor::from_data(
      {6, 4, 4}, resize_bilinear_chw(
                     std::vector<double>(pair16.data(), pair16.data() + pair16.numel()), 6, 16,
                     16, 4, 4));
  const Tensor d_before = apply_deformation(led, probe, pair4, 0.0, 0).delta;
  (void)orbit_render(scene, base, {-0.3, 0.3}, {}, opts);
  const Tensor d_after = apply_deformation(led, probe, pair4, 0.0, 0).delta;
  for (int64_t i = 0; i < d_before.numel(); ++i) {
    CHECK(d_before.data()[i] == d_after.data()[i]);
  }
}

TEST_CASE("head checkpoint round-trip") {
  const RadianceHead head = make_radiance_head(10, 6, 41);
  Checkpoint ckpt;
  put_head(ckpt, head);
  const std::string path = (std::filesystem::temp_directory_path() / "tpdr_head.ckpt").string();
  save_checkpoint(ckpt, path);
  const RadianceHead restored = head_from_checkpoint(load_checkpoint(path));
  const auto a = head.parameters(), b = restored.parameters();
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    for (int64_t j = 0; j < a[i].second.numel(); ++j) {
      CHECK(a[i].second.data()[j] == b[i].second.data()[j]);
    }
  }
  Checkpoint missing;
  CHECK_THROWS_AS(head_from_checkpoint(missing), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("render argument validation") {
  RenderScene scene;
  scene.planes = spike_planes();
  scene.head = threshold_head();
  const Camera cam = frontal_camera(8);
  RenderOptions opts = basic_options(1);
  CHECK_THROWS_AS(render_image(scene, cam, opts), std::invalid_argument);
  opts = basic_options(4);
  CHECK_THROWS_AS(render_rays(scene, cam, opts, {}), std::invalid_argument);
  CHECK_THROWS_AS(render_rays(scene, cam, opts, {64}), std::invalid_argument);
  scene.use_led = true;
  scene.led = make_led(4, 4, 2, 2, 2, 1);
  scene.secc_pair = Tensor::zeros({5, 8, 8});
  CHECK_THROWS_AS(render_image(scene, cam, opts), std::invalid_argument);
}

TEST_CASE("rgb and alpha images place ray results at their pixels") {
  RenderScene scene;
  scene.planes = spike_planes();
  scene.head = threshold_head();
  const Camera cam = frontal_camera(4);
  const RenderResult res = render_rays(scene, cam, basic_options(8), {5, 10});
  const std::vector<double> rgb = res.rgb_image();
  const std::vector<double> alpha = res.alpha_image();
  CHECK(rgb[5 * 3] == res.rgb_alpha.data()[0]);
  CHECK(rgb[10 * 3 + 2] == res.rgb_alpha.data()[6]);
  CHECK(alpha[5] == res.rgb_alpha.data()[3]);
  CHECK(alpha[10] == res.rgb_alpha.data()[7]);
  CHECK(rgb[0] == 0.0);
  CHECK(alpha[0] == 0.0);
}
