#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <vector>

#include "checkpoint.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

using namespace tpdr;

namespace {

Tensor random_param(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.uniform(lo, hi);
  Tensor t = Tensor::from_data(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

// Fixed random weighting turns a tensor-valued op into a scalar loss with
// non-uniform pull on every output entry.
Tensor weighted_sum(const Tensor& x, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(static_cast<size_t>(x.numel()));
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  return sum(mul(x, Tensor::from_data(x.shape(), std::move(w))));
}

void expect_fd_ok(const std::function<Tensor()>& f, const std::vector<std::pair<std::string, Tensor>>& params,
                  double tol = 1e-4) {
  const FdReport rep = finite_difference_check(f, params, 1e-5);
  INFO("worst ", rep.worst_param, "[", rep.worst_index, "] rel err ", rep.max_rel_err);
  CHECK(rep.max_rel_err < tol);
}

}  // namespace

TEST_CASE("add computes elementwise sums") {
  Tensor a = Tensor::from_data({2}, {1.0, 2.0});
  Tensor b = Tensor::from_data({2}, {3.0, 4.0});
  Tensor c = add(a, b);
  CHECK(c.data()[0] == 4.0);
  CHECK(c.data()[1] == 6.0);
}

TEST_CASE("shape mismatch names the op and both shapes") {
  Tensor a = Tensor::zeros({2});
  Tensor b = Tensor::zeros({3});
  CHECK_THROWS_WITH_AS(add(a, b), "add: shape mismatch [2] vs [3]", std::invalid_argument);
  CHECK_THROWS_WITH_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})),
                       "matmul: incompatible shapes [2,3] x [4,2]", std::invalid_argument);
}

TEST_CASE("matmul of ones") {
  Tensor a = Tensor::full({2, 3}, 1.0);
  Tensor b = Tensor::full({3, 2}, 1.0);
  Tensor c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 2});
  for (int64_t i = 0; i < 4; ++i) CHECK(c.data()[i] == 3.0);
}

TEST_CASE("conv2d with identity kernel preserves the image") {
  Rng rng(7);
  Tensor img = random_param(rng, {2, 4, 5});
  img.set_requires_grad(false);
  // w[oc][ic] = delta(oc,ic), 1x1 kernel.
  Tensor w = Tensor::from_data({2, 2, 1, 1}, {1.0, 0.0, 0.0, 1.0});
  Tensor out = conv2d(img, w, Tensor(), 1, 0);
  REQUIRE(out.shape() == img.shape());
  for (int64_t i = 0; i < img.numel(); ++i) CHECK(out.data()[i] == img.data()[i]);
}

TEST_CASE("conv2d output geometry with stride and pad") {
  Tensor x = Tensor::full({1, 5, 5}, 1.0);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor out = conv2d(x, w, Tensor(), 2, 1);
  REQUIRE(out.shape() == Shape{1, 3, 3});
  // Center tap sees the full 3x3 window; corners see 2x2.
  CHECK(out.data()[4] == 9.0);
  CHECK(out.data()[0] == 4.0);
}

TEST_CASE("grad of sum is ones") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0});
  x.set_requires_grad(true);
  backward(sum(x));
  REQUIRE(x.has_grad());
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);
}

TEST_CASE("grad of sum of squares is 2x") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  backward(sum(mul(x, x)));
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
}

TEST_CASE("backward rejects non-scalar loss and empty graph") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(backward(y), std::invalid_argument);
  clear_graph();
  Tensor leaf = Tensor::scalar(1.0);
  leaf.set_requires_grad(true);
  CHECK_THROWS_AS(backward(leaf), std::runtime_error);
}

TEST_CASE("grad access on a tensor without grad throws") {
  Tensor x = Tensor::zeros({2});
  CHECK(!x.has_grad());
  CHECK_THROWS_AS(x.grad(), std::runtime_error);
}

TEST_CASE("finite differences are exact for quadratics") {
  Rng rng(11);
  Tensor x = random_param(rng, {6});
  const FdReport rep = finite_difference_check([&] { return sum(mul(x, x)); }, {{"x", x}}, 1e-5);
  CHECK(rep.max_rel_err < 1e-9);
  CHECK(rep.entries_checked == 6);
}

TEST_CASE("per-op gradients match central differences") {
  Rng rng(23);

  SUBCASE("add sub mul") {
    Tensor a = random_param(rng, {3, 4});
    Tensor b = random_param(rng, {3, 4});
    expect_fd_ok([&] { return weighted_sum(mul(add(a, b), sub(a, b)), 1); }, {{"a", a}, {"b", b}});
  }
  SUBCASE("scalar ops") {
    Tensor a = random_param(rng, {5});
    expect_fd_ok([&] { return weighted_sum(add_scalar(mul_scalar(a, 2.5), -0.3), 2); }, {{"a", a}});
  }
  SUBCASE("matmul and add_rowvec") {
    Tensor a = random_param(rng, {4, 3});
    Tensor b = random_param(rng, {3, 5});
    Tensor bias = random_param(rng, {5});
    expect_fd_ok([&] { return weighted_sum(add_rowvec(matmul(a, b), bias), 3); },
                 {{"a", a}, {"b", b}, {"bias", bias}});
  }
  SUBCASE("conv2d with stride and pad") {
    Tensor x = random_param(rng, {2, 5, 5});
    Tensor w = random_param(rng, {3, 2, 3, 3});
    Tensor bias = random_param(rng, {3});
    expect_fd_ok([&] { return weighted_sum(conv2d(x, w, bias, 2, 1), 4); },
                 {{"x", x}, {"w", w}, {"bias", bias}});
  }
  SUBCASE("activations") {
    // Keep inputs away from the leaky_relu kink and the abs kink, where
    // central differences straddle the non-smooth point.
    std::vector<double> v(8);
    for (double& q : v) {
      q = rng.uniform(0.1, 1.0);
      if (rng.uniform() < 0.5) q = -q;
    }
    Tensor x = Tensor::from_data({8}, std::move(v));
    x.set_requires_grad(true);
    expect_fd_ok([&] { return weighted_sum(leaky_relu(x, 0.2), 5); }, {{"x", x}});
    expect_fd_ok([&] { return weighted_sum(sigmoid(x), 6); }, {{"x", x}});
    expect_fd_ok([&] { return weighted_sum(softplus(x), 7); }, {{"x", x}});
    expect_fd_ok([&] { return weighted_sum(abs(x), 8); }, {{"x", x}});
  }
  SUBCASE("upsample concat reshape") {
    Tensor a = random_param(rng, {2, 3, 3});
    Tensor b = random_param(rng, {1, 6, 6});
    expect_fd_ok(
        [&] {
          Tensor up = upsample2x_nearest(a);
          Tensor cat = concat_channels({up, b});
          return weighted_sum(reshape(cat, {3, 36}), 9);
        },
        {{"a", a}, {"b", b}});
  }
  SUBCASE("concat on inner dim") {
    Tensor a = random_param(rng, {3, 2});
    Tensor b = random_param(rng, {3, 4});
    expect_fd_ok([&] { return weighted_sum(concat({a, b}, 1), 10); }, {{"a", a}, {"b", b}});
  }
  SUBCASE("row and column selection") {
    Tensor x = random_param(rng, {6, 5});
    expect_fd_ok(
        [&] {
          Tensor rows = gather_rows(x, {4, 0, 4, 2});
          return weighted_sum(slice_cols(rows, 1, 4), 11);
        },
        {{"x", x}});
  }
  SUBCASE("sample grid to point rows") {
    Tensor x = random_param(rng, {6, 2, 3});  // two samples of 3 coords over 2x3
    expect_fd_ok([&] { return weighted_sum(chw_points_to_rows(x, 2), 12); }, {{"x", x}});
  }
  SUBCASE("mean") {
    Tensor x = random_param(rng, {7});
    expect_fd_ok([&] { return mean(mul(x, x)); }, {{"x", x}});
  }
}

TEST_CASE("composed two-layer network passes the gradient check") {
  Rng rng(31);
  Tensor x = random_param(rng, {4, 3});
  x.set_requires_grad(false);
  Tensor w1 = random_param(rng, {3, 8});
  Tensor b1 = random_param(rng, {8});
  Tensor w2 = random_param(rng, {8, 2});
  Tensor b2 = random_param(rng, {2});
  expect_fd_ok(
      [&] {
        Tensor h = leaky_relu(add_rowvec(matmul(x, w1), b1), 0.2);
        Tensor y = add_rowvec(matmul(h, w2), b2);
        return mean(add(sigmoid(slice_cols(y, 0, 1)), softplus(slice_cols(y, 1, 2))));
      },
      {{"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}});
}

TEST_CASE("backward after a second forward pass doubles leaf grads") {
  Rng rng(41);
  Tensor x = random_param(rng, {5});
  auto run = [&] { backward(sum(mul(x, sigmoid(x)))); };
  run();
  const std::vector<double> g1 = x.grad();
  run();
  for (size_t i = 0; i < g1.size(); ++i) CHECK(x.grad()[i] == 2.0 * g1[i]);
}

TEST_CASE("identical seeds give bit-identical values and grads") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_param(rng, {3, 3});
    Tensor w = random_param(rng, {3, 3});
    Tensor loss = mean(sigmoid(matmul(x, w)));
    backward(loss);
    std::vector<uint64_t> bits;
    auto push = [&](const std::vector<double>& v) {
      for (double d : v) bits.push_back(std::bit_cast<uint64_t>(d));
    };
    push({loss.item()});
    push(x.grad());
    push(w.grad());
    return bits;
  };
  CHECK(run(97) == run(97));
  CHECK(run(97) != run(98));
}

TEST_CASE("no-grad mode records nothing on the graph") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  {
    NoGradGuard guard;
    Tensor y = mul(x, x);
    CHECK(!y.requires_grad());
  }
  CHECK(graph_size() == 0);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Checkpoint ckpt;
  ckpt.put("a.weight", Tensor::from_data({2, 3}, {0.0, -0.0, 1.0 / 3.0, 3.141592653589793,
                                                  5e-324, -1.7976931348623157e308}));
  ckpt.put("a.bias", Tensor::from_data({3}, {1.0, 2.0, 3.0}));
  ckpt.put("empty-name-ok", Tensor::scalar(42.0));

  const std::string path = "roundtrip.tpdr";
  save_checkpoint(ckpt, path);
  Checkpoint back = load_checkpoint(path);

  REQUIRE(back.entries.size() == ckpt.entries.size());
  for (size_t i = 0; i < ckpt.entries.size(); ++i) {
    CHECK(back.entries[i].first == ckpt.entries[i].first);
    const Tensor& t0 = ckpt.entries[i].second;
    const Tensor& t1 = back.entries[i].second;
    REQUIRE(t1.shape() == t0.shape());
    for (int64_t k = 0; k < t0.numel(); ++k) {
      CHECK(std::bit_cast<uint64_t>(t1.data()[k]) == std::bit_cast<uint64_t>(t0.data()[k]));
    }
  }

  // Second save of the loaded bundle must produce identical bytes.
  const std::string path2 = "roundtrip2.tpdr";
  save_checkpoint(back, path2);
  auto slurp = [](const std::string& p) {
    FILE* f = std::fopen(p.c_str(), "rb");
    REQUIRE(f != nullptr);
    std::vector<unsigned char> v;
    int c;
    while ((c = std::fgetc(f)) != EOF) v.push_back(static_cast<unsigned char>(c));
    std::fclose(f);
    return v;
  };
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint loader rejects garbage") {
  const std::string path = "bad.tpdr";
  FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  std::fputs("NOPE", f);
  std::fclose(f);
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint("does-not-exist.tpdr"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint lookup helpers") {
  Checkpoint ckpt;
  ckpt.put("x", Tensor::scalar(1.0));
  ckpt.put("x", Tensor::scalar(2.0));  // replaces
  CHECK(ckpt.entries.size() == 1);
  CHECK(ckpt.require("x").item() == 2.0);
  CHECK(!ckpt.has("y"));
  CHECK_THROWS_AS(ckpt.require("y"), std::runtime_error);
}
