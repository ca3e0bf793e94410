#include <doctest.h>

#include <cmath>

#include "tgseg/ad/gradcheck.hpp"
#include "tgseg/ad/graph.hpp"
#include "tgseg/eval/selfcheck.hpp"
#include "tgseg/util/rng.hpp"

using namespace tgseg;
using ad::Graph;
using ad::TensorF;
using ad::Var;

TEST_CASE("conv2d identity kernel reproduces the input") {
  Graph<float> g;
  TensorF x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Var xv = g.leaf(x, false);
  Var k = g.constant(TensorF({1, 1, 1, 1}, {1.0f}));
  Var y = g.conv2d(xv, k, 1, 0);
  CHECK(g.val(y).shape == ad::Shape{1, 3, 3});
  CHECK(g.val(y).data == x.data);
}

TEST_CASE("conv2d 2x2 dot product case") {
  Graph<float> g;
  Var x = g.constant(TensorF({1, 2, 2}, {1, 2, 3, 4}));
  Var k = g.constant(TensorF({1, 1, 2, 2}, {1, 0, 0, 1}));
  Var y = g.conv2d(x, k, 1, 0);
  CHECK(g.val(y).shape == ad::Shape{1, 1, 1});
  CHECK(g.val(y).data[0] == doctest::Approx(5.0f));
}

TEST_CASE("conv2d averaging kernel keeps a constant image constant") {
  Graph<float> g;
  Var x = g.constant(TensorF::full({1, 5, 5}, 0.7f));
  Var k = g.constant(TensorF::full({1, 1, 3, 3}, 1.0f / 9.0f));
  Var y = g.conv2d(x, k, 1, 0);
  CHECK(g.val(y).shape == ad::Shape{1, 3, 3});
  for (float v : g.val(y).data) CHECK(v == doctest::Approx(0.7f).epsilon(1e-6));
}

TEST_CASE("conv2d rejects channel mismatch naming the dimensions") {
  Graph<float> g;
  Var x = g.constant(TensorF({3, 4, 4}));
  Var k = g.constant(TensorF({2, 4, 3, 3}));
  CHECK_THROWS_WITH_AS(g.conv2d(x, k, 1, 1),
                       doctest::Contains("input channels C=3"), ad::ShapeError);
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
  Graph<float> g;
  Var x = g.constant(TensorF({1, 2, 2}));
  Var k = g.constant(TensorF({1, 1, 5, 5}));
  CHECK_THROWS_AS(g.conv2d(x, k, 1, 1), ad::ShapeError);
  CHECK_NOTHROW(g.conv2d(x, k, 1, 2));  // 2+2*2 >= 5
}

TEST_CASE("conv2d stride and padding output shape contract") {
  Graph<float> g;
  Var x = g.constant(TensorF({1, 7, 9}));
  Var k = g.constant(TensorF({2, 1, 3, 3}));
  Var y = g.conv2d(x, k, 2, 1);
  // H' = floor((7+2-3)/2)+1 = 4, W' = floor((9+2-3)/2)+1 = 5
  CHECK(g.val(y).shape == ad::Shape{2, 4, 5});
}

TEST_CASE("conv2d forward is pure: backward leaves input data unchanged") {
  Graph<float> g;
  TensorF x({1, 4, 4});
  Rng rng(3);
  for (auto& v : x.data) v = rng.uniform_f(-1, 1);
  Var xv = g.leaf(x, true);
  Var k = g.leaf(TensorF::full({1, 1, 3, 3}, 0.5f), true);
  Var loss = g.sum(g.conv2d(xv, k, 1, 1));
  g.backward(loss);
  CHECK(g.val(xv).data == x.data);
  CHECK(g.has_grad(xv));
}

TEST_CASE("relu, cosine, sigmoid primitive examples") {
  Graph<float> g;
  Var r = g.relu(g.constant(TensorF({3}, {-1, 0, 2})));
  CHECK(g.val(r).data == std::vector<float>{0, 0, 2});

  Var c = g.cosine_similarity(g.constant(TensorF({2}, {1, 0})),
                              g.constant(TensorF({2}, {0, 1})));
  CHECK(g.val(c).data[0] == doctest::Approx(0.0f));

  Var s = g.sigmoid(g.constant(TensorF({1}, {0.0f})));
  CHECK(g.val(s).data[0] == doctest::Approx(0.5f));
}

TEST_CASE("cosine_similarity rejects zero-norm input") {
  Graph<float> g;
  Var a = g.constant(TensorF({2}, {0, 0}));
  Var b = g.constant(TensorF({2}, {1, 0}));
  CHECK_THROWS_AS(g.cosine_similarity(a, b), ad::DegenerateInput);
}

TEST_CASE("sigmoid stays strictly inside (0,1) for extreme finite inputs") {
  Graph<float> g;
  Var s = g.sigmoid(g.constant(TensorF({4}, {-100.0f, -30.0f, 30.0f, 100.0f})));
  for (float v : g.val(s).data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("concat_channels then slice_channels recovers both parts exactly") {
  Graph<float> g;
  TensorF a({2, 3, 3});
  TensorF b({3, 3, 3});
  Rng rng(5);
  for (auto& v : a.data) v = rng.uniform_f(-1, 1);
  for (auto& v : b.data) v = rng.uniform_f(-1, 1);
  Var cat = g.concat_channels(g.constant(a), g.constant(b));
  CHECK(g.val(cat).shape == ad::Shape{5, 3, 3});
  CHECK(g.val(g.slice_channels(cat, 0, 2)).data == a.data);
  CHECK(g.val(g.slice_channels(cat, 2, 5)).data == b.data);
}

TEST_CASE("backward of sum gives all-ones gradient") {
  Graph<float> g;
  Var x = g.leaf(TensorF({2, 3}, {1, 2, 3, 4, 5, 6}), true);
  g.backward(g.sum(x));
  CHECK(g.grad(x) == std::vector<float>(6, 1.0f));
}

TEST_CASE("backward of sum(x*x) at [1,2,3] gives [2,4,6]") {
  Graph<float> g;
  Var x = g.leaf(TensorF({3}, {1, 2, 3}), true);
  g.backward(g.sum(g.mul(x, x)));
  CHECK(g.grad(x) == std::vector<float>{2, 4, 6});
}

TEST_CASE("repeated backward calls accumulate leaf gradients") {
  Graph<float> g;
  Var x = g.leaf(TensorF({3}, {1, 2, 3}), true);
  Var loss = g.sum(x);
  g.backward(loss);
  g.backward(loss);
  CHECK(g.grad(x) == std::vector<float>(3, 2.0f));
}

TEST_CASE("backward on a non-scalar node is a contract error") {
  Graph<float> g;
  Var x = g.leaf(TensorF({3}, {1, 2, 3}), true);
  CHECK_THROWS_AS(g.backward(g.mul(x, x)), ad::ContractError);
}

TEST_CASE("frozen leaves never receive gradient buffers") {
  Graph<float> g;
  Var frozen = g.leaf(TensorF({3}, {1, 2, 3}), false);
  Var train = g.leaf(TensorF({3}, {4, 5, 6}), true);
  g.backward(g.sum(g.mul(frozen, train)));
  CHECK_FALSE(g.has_grad(frozen));
  CHECK(g.grad(train) == std::vector<float>{1, 2, 3});
}

TEST_CASE("grad of mean(sigmoid(matmul(W,x))) matches finite differences") {
  Rng rng(11);
  TensorF w({4, 5});
  for (auto& v : w.data) v = rng.uniform_f(-1, 1);
  TensorF x({5, 1});
  for (auto& v : x.data) v = rng.uniform_f(-1, 1);

  auto fn = [&](const TensorF& pt, std::vector<float>* grad) -> float {
    Graph<float> g;
    Var xv = g.leaf(pt, true);
    Var y = g.mean(g.sigmoid(g.matmul(g.constant(w), xv)));
    if (grad) {
      g.backward(y);
      *grad = g.grad(xv);
    }
    return g.val(y).data[0];
  };
  ad::GradCheckOptions opt;
  opt.eps = 1e-2;
  opt.tol = 1e-3;
  const auto rep = ad::grad_check<float>(fn, x, opt);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err <= 1e-3);
}

TEST_CASE("grad_check on sum passes with vanishing error") {
  // In the 64-bit oracle mode the relative error is zero up to the last
  // couple of ulps of the finite-difference quotient itself.
  auto fn = [](const ad::TensorD& pt, std::vector<double>* grad) -> double {
    Graph<double> g;
    Var xv = g.leaf(pt, true);
    Var y = g.sum(xv);
    if (grad) {
      g.backward(y);
      *grad = g.grad(xv);
    }
    return g.val(y).data[0];
  };
  ad::TensorD x({4}, {0.3, -0.7, 1.1, 0.5});
  ad::GradCheckOptions opt;
  opt.eps = 1e-3;
  opt.tol = 1e-6;
  const auto rep = ad::grad_check<double>(fn, x, opt);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err <= 1e-11);
}

TEST_CASE("grad_check fails on a deliberately wrong backward rule") {
  // y = sum(x^2) but the custom node claims dy/dx = x instead of 2x.
  auto fn = [](const TensorF& pt, std::vector<float>* grad) -> float {
    Graph<float> g;
    Var xv = g.leaf(pt, true);
    TensorF sq(pt.shape);
    for (std::size_t i = 0; i < pt.numel(); ++i) sq.data[i] = pt.data[i] * pt.data[i];
    Var bad = g.custom(sq, {xv}, [xv](Graph<float>& gg, Var self) {
      const auto& gr = gg.grad(self);
      std::vector<float> gx(gr.size());
      for (std::size_t i = 0; i < gr.size(); ++i)
        gx[i] = gr[i] * gg.val(xv).data[i];  // wrong: missing factor 2
      gg.accum(xv, gx.data(), gx.size());
    });
    Var y = g.sum(bad);
    if (grad) {
      g.backward(y);
      *grad = g.grad(xv);
    }
    return g.val(y).data[0];
  };
  TensorF x({3}, {0.8f, -1.2f, 0.6f});
  ad::GradCheckOptions opt;
  opt.eps = 1e-3;
  opt.tol = 1e-3;
  const auto rep = ad::grad_check<float>(fn, x, opt);
  CHECK_FALSE(rep.pass);
  CHECK(rep.failures > 0);
}

TEST_CASE("max_pool2d picks maxima and routes gradient to the argmax") {
  Graph<float> g;
  Var x = g.leaf(TensorF({1, 2, 4}, {1, 5, 2, 0, 3, 4, 1, 7}), true);
  Var y = g.max_pool2d(x);
  CHECK(g.val(y).shape == ad::Shape{1, 1, 2});
  CHECK(g.val(y).data == std::vector<float>{5, 7});
  g.backward(g.sum(y));
  CHECK(g.grad(x) == std::vector<float>{0, 1, 0, 0, 0, 0, 0, 1});
}

TEST_CASE("max_pool2d floors odd trailing rows and columns") {
  Graph<float> g;
  // 3x5 plane: only the top-left 2x4 region is pooled.
  Var x = g.leaf(TensorF({1, 3, 5}, {1, 2, 3, 4, 9,
                                     5, 6, 7, 8, 9,
                                     9, 9, 9, 9, 9}),
                 true);
  Var y = g.max_pool2d(x);
  CHECK(g.val(y).shape == ad::Shape{1, 1, 2});
  CHECK(g.val(y).data == std::vector<float>{6, 8});
  g.backward(g.sum(y));
  // No gradient reaches the unpooled last row/column.
  CHECK(g.grad(x) == std::vector<float>{0, 0, 0, 0, 0,
                                        0, 1, 0, 1, 0,
                                        0, 0, 0, 0, 0});
}

TEST_CASE("nearest_upsample2d doubles each pixel") {
  Graph<float> g;
  Var x = g.constant(TensorF({1, 1, 2}, {3, 4}));
  Var y = g.nearest_upsample2d(x);
  CHECK(g.val(y).shape == ad::Shape{1, 2, 4});
  CHECK(g.val(y).data == std::vector<float>{3, 3, 4, 4, 3, 3, 4, 4});
}

TEST_CASE("rot90 composes to identity after four quarter turns") {
  Graph<float> g;
  TensorF x({2, 4, 4});
  Rng rng(9);
  for (auto& v : x.data) v = rng.uniform_f(-1, 1);
  Var v0 = g.constant(x);
  Var v = v0;
  for (int i = 0; i < 4; ++i) v = g.rot90(v, 1);
  CHECK(g.val(v).data == x.data);
  // k and 4-k are inverses
  Var w = g.rot90(g.rot90(v0, 3), 1);
  CHECK(g.val(w).data == x.data);
}

TEST_CASE("every primitive passes the finite-difference audit in both modes") {
  // Away from kinks the single-precision primitives hold a 1e-3 relative
  // tolerance; the float64 oracle tightens that to 1e-6.
  for (const auto& c : eval::primitive_grad_checks_f32(1e-3)) {
    CAPTURE(c.name);
    CHECK(c.report.pass);
    CHECK(c.report.max_rel_err <= 1e-3);
  }
  for (const auto& c : eval::primitive_grad_checks_f64(1e-6)) {
    CAPTURE(c.name);
    CHECK(c.report.pass);
    CHECK(c.report.max_rel_err <= 1e-6);
  }
}
