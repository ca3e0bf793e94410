#include <doctest.h>

#include <cmath>

#include "tgseg/ad/gradcheck.hpp"
#include "tgseg/data/synthetic.hpp"
#include "tgseg/model/model.hpp"
#include "tgseg/util/rng.hpp"

using namespace tgseg;
using ad::Graph;
using ad::TensorF;
using ad::Var;

namespace {

model::ModelConfig tiny_config() {
  model::ModelConfig mc;
  mc.d_raw = 32;
  mc.d_t = 16;
  mc.d_i = 16;
  mc.d_p = 16;
  mc.c_p = 1;
  mc.image_side = 16;
  mc.unet_depth = 3;
  mc.unet_width = 8;
  return mc;
}

TensorF random_tensor(ad::Shape shape, std::uint64_t seed, float lo = -1, float hi = 1) {
  TensorF t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data) v = rng.uniform_f(lo, hi);
  return t;
}

void zero_param(model::Model& m, const std::string& name) {
  const int id = m.param_id(name);
  REQUIRE(id >= 0);
  for (auto& v : m.params().value(id).data) v = 0.0f;
}

}  // namespace

TEST_CASE("project_text with identity weights reproduces the raw embedding") {
  model::ModelConfig mc = tiny_config();
  mc.d_raw = 16;  // square so the projection can be the identity
  model::Model m(mc, 3);
  const int wid = m.param_id("text_proj.weight");
  auto& w = m.params().value(wid);
  for (auto& v : w.data) v = 0.0f;
  for (std::size_t i = 0; i < 16; ++i) w.data[i * 16 + i] = 1.0f;

  Graph<float> g;
  auto b = m.bind(g);
  const TensorF raw = random_tensor({16}, 5);
  Var t = m.project_text(b, g.constant(raw));
  CHECK(g.val(t).data == raw.data);
}

TEST_CASE("project_text with zero weights maps to the zero vector") {
  model::Model m(tiny_config(), 3);
  zero_param(m, "text_proj.weight");
  Graph<float> g;
  auto b = m.bind(g);
  Var t = m.project_text(b, g.constant(random_tensor({32}, 6)));
  CHECK(g.val(t).data == std::vector<float>(16, 0.0f));
}

TEST_CASE("project_text matches an independent matrix-vector oracle") {
  model::Model m(tiny_config(), 4);
  Graph<float> g;
  auto b = m.bind(g);
  const TensorF raw = random_tensor({32}, 7);
  Var t = m.project_text(b, g.constant(raw));
  const auto& w = m.params().value(m.param_id("text_proj.weight"));
  const auto& bias = m.params().value(m.param_id("text_proj.bias"));
  for (std::size_t r = 0; r < 16; ++r) {
    float acc = bias.data[r];
    for (std::size_t cidx = 0; cidx < 32; ++cidx)
      acc += w.data[r * 32 + cidx] * raw.data[cidx];
    CHECK(g.val(t).data[r] == doctest::Approx(acc).epsilon(1e-5));
  }
}

TEST_CASE("encode_image_global shape contract and zero-image case") {
  model::Model m(tiny_config(), 5);
  Graph<float> g;
  auto b = m.bind(g);
  Var i16 = m.encode_image_global(b, g.constant(TensorF({3, 16, 16})));
  CHECK(g.val(i16).shape == ad::Shape{16});
  // All-zero image: conv stack with zero biases gives zero features, so the
  // embedding equals the (zero) linear bias.
  CHECK(g.val(i16).data == std::vector<float>(16, 0.0f));

  Var i24 = m.encode_image_global(b, g.constant(random_tensor({3, 24, 32}, 8, 0, 1)));
  CHECK(g.val(i24).shape == ad::Shape{16});
  // Odd sides above the minimum still pool (floor semantics).
  Var i17 = m.encode_image_global(b, g.constant(random_tensor({3, 17, 21}, 9, 0, 1)));
  CHECK(g.val(i17).shape == ad::Shape{16});

  CHECK_THROWS_AS(m.encode_image_global(b, g.constant(TensorF({3, 8, 8}))),
                  ad::ShapeError);
}

TEST_CASE("brightness offsets change the visual embedding") {
  model::Model m(tiny_config(), 6);
  Graph<float> g;
  auto b = m.bind(g);
  TensorF img = random_tensor({3, 16, 16}, 9, 0.1f, 0.7f);
  TensorF brighter = img;
  for (auto& v : brighter.data) v += 0.2f;
  Var ia = m.encode_image_global(b, g.constant(img));
  Var ib = m.encode_image_global(b, g.constant(brighter));
  CHECK(g.val(ia).data != g.val(ib).data);
}

TEST_CASE("fuse with zero-initialized output layer is the identity on t") {
  model::Model m(tiny_config(), 7);  // default zero-init heads
  Graph<float> g;
  auto b = m.bind(g);
  for (int trial = 0; trial < 100; ++trial) {
    const TensorF t = random_tensor({16}, 100 + trial);
    const TensorF i = random_tensor({16}, 200 + trial);
    auto [delta, t_ref] = m.fuse(b, g.constant(t), g.constant(i));
    CHECK(g.val(delta).data == std::vector<float>(16, 0.0f));
    for (std::size_t k = 0; k < 16; ++k) CHECK(g.val(t_ref).data[k] == t.data[k]);
  }
}

TEST_CASE("fuse adds the refinement term elementwise") {
  // Forced delta: bias of the output layer set, weights zero.
  model::Model m(tiny_config(), 8);
  auto& b2 = m.params().value(m.param_id("fuse.fc2.bias"));
  for (auto& v : b2.data) v = 0.5f;
  Graph<float> g;
  auto b = m.bind(g);
  const TensorF t = random_tensor({16}, 11);
  auto [delta, t_ref] = m.fuse(b, g.constant(t), g.constant(random_tensor({16}, 12)));
  for (std::size_t k = 0; k < 16; ++k) {
    CHECK(g.val(delta).data[k] == doctest::Approx(0.5f));
    CHECK(g.val(t_ref).data[k] == doctest::Approx(t.data[k] + 0.5f));
  }
}

TEST_CASE("fuse matches an independent two-layer-perceptron oracle") {
  model::Model m(tiny_config(), 9, /*zero_init_heads=*/false);
  Graph<float> g;
  auto b = m.bind(g);
  const TensorF t = random_tensor({16}, 13);
  const TensorF iv = random_tensor({16}, 14);
  auto [delta, t_ref] = m.fuse(b, g.constant(t), g.constant(iv));

  const auto& w1 = m.params().value(m.param_id("fuse.fc1.weight"));
  const auto& b1 = m.params().value(m.param_id("fuse.fc1.bias"));
  const auto& w2 = m.params().value(m.param_id("fuse.fc2.weight"));
  const auto& b2 = m.params().value(m.param_id("fuse.fc2.bias"));
  std::vector<float> z(32);
  for (int k = 0; k < 16; ++k) {
    z[k] = t.data[k];
    z[16 + k] = iv.data[k];
  }
  std::vector<float> hid(64);
  for (int r = 0; r < 64; ++r) {
    float acc = b1.data[r];
    for (int cidx = 0; cidx < 32; ++cidx) acc += w1.data[r * 32 + cidx] * z[cidx];
    hid[r] = acc > 0 ? acc : 0;
  }
  for (int r = 0; r < 16; ++r) {
    float acc = b2.data[r];
    for (int cidx = 0; cidx < 64; ++cidx) acc += w2.data[r * 64 + cidx] * hid[cidx];
    CHECK(g.val(delta).data[r] == doctest::Approx(acc).epsilon(1e-4));
    CHECK(g.val(t_ref).data[r] == doctest::Approx(t.data[r] + acc).epsilon(1e-4));
  }
}

TEST_CASE("generate_pseudo shape, range, and determinism") {
  model::Model m(tiny_config(), 10, false);
  Graph<float> g;
  auto b = m.bind(g);
  const TensorF t = random_tensor({16}, 15);
  Var p1 = m.generate_pseudo(b, g.constant(t), 16);
  CHECK(g.val(p1).shape == ad::Shape{1, 16, 16});
  for (float v : g.val(p1).data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  Var p2 = m.generate_pseudo(b, g.constant(t), 16);
  CHECK(g.val(p1).data == g.val(p2).data);

  model::ModelConfig bad = tiny_config();
  bad.image_side = 20;  // not divisible by 8
  model::Model mb(bad, 4);
  Graph<float> g2;
  auto b2 = mb.bind(g2);
  CHECK_THROWS_AS(mb.generate_pseudo(b2, g2.constant(t), 20), ad::ShapeError);
}

TEST_CASE("image_to_text returns d_t values and zero for zero input at init") {
  model::Model m(tiny_config(), 11);  // zero-init head
  Graph<float> g;
  auto b = m.bind(g);
  Var th = m.image_to_text(b, g.constant(TensorF({1, 16, 16})));
  CHECK(g.val(th).shape == ad::Shape{16});
  CHECK(g.val(th).data == std::vector<float>(16, 0.0f));

  model::Model mr(tiny_config(), 12, false);
  Graph<float> g2;
  auto b2 = mr.bind(g2);
  Var th2 = mr.image_to_text(b2, g2.constant(random_tensor({1, 16, 16}, 16, 0, 1)));
  CHECK(g2.val(th2).shape == ad::Shape{16});
}

TEST_CASE("image_to_text gradient w.r.t. the pseudo image matches finite differences") {
  model::Model m(tiny_config(), 13, false);
  auto fn = [&](const TensorF& pt, std::vector<float>* grad) -> float {
    Graph<float> g;
    auto b = m.bind(g, false);
    Var pseudo = g.leaf(pt, true);
    Var y = g.mean(m.image_to_text(b, pseudo));
    if (grad) {
      g.backward(y);
      *grad = g.grad(pseudo);
    }
    return g.val(y).data[0];
  };
  ad::GradCheckOptions opt;
  opt.eps = 1e-2;
  opt.tol = 5e-3;
  opt.max_coords = 64;
  const auto rep = ad::grad_check<float>(fn, random_tensor({1, 16, 16}, 17, 0.1f, 0.9f), opt);
  CHECK(rep.pass);
}

TEST_CASE("cycle_loss values") {
  Graph<float> g;
  Var a = g.constant(TensorF({2}, {1, 0}));
  Var bb = g.constant(TensorF({2}, {0, 1}));
  CHECK(g.val(model::cycle_loss(g, a, bb)).data[0] == doctest::Approx(2.0f));
  CHECK(g.val(model::cycle_loss(g, a, a)).data[0] == doctest::Approx(0.0f));
  Var z = g.constant(TensorF({2}, {0, 0}));
  CHECK(g.val(model::cycle_loss(g, z, z)).data[0] == doctest::Approx(0.0f));
  // symmetry and positivity off the diagonal
  CHECK(g.val(model::cycle_loss(g, bb, a)).data[0] ==
        g.val(model::cycle_loss(g, a, bb)).data[0]);
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    TensorF u = random_tensor({6}, 500 + trial);
    TensorF v = u;
    v.data[rng.below(6)] += rng.uniform_f(0.01f, 1.0f);
    CHECK(g.val(model::cycle_loss(g, g.constant(u), g.constant(v))).data[0] > 0.0f);
  }
}

TEST_CASE("gen_loss values") {
  Graph<float> g;
  Var ones = g.constant(TensorF::full({1, 2, 2}, 1.0f));
  Var zeros = g.constant(TensorF::full({1, 2, 2}, 0.0f));
  CHECK(g.val(model::gen_loss(g, ones, ones)).data[0] == doctest::Approx(0.0f));
  CHECK(g.val(model::gen_loss(g, ones, zeros)).data[0] == doctest::Approx(1.0f));
  Var p = g.constant(TensorF({2}, {0.2f, 0.8f}));
  Var s = g.constant(TensorF({2}, {0.0f, 1.0f}));
  CHECK(g.val(model::gen_loss(g, p, s)).data[0] == doctest::Approx(0.2f));
}

TEST_CASE("iac_loss rejects zero-norm projections") {
  Graph<float> g;
  Var z = g.constant(TensorF({3}));
  Var v = g.constant(TensorF({3}, {1, 2, 3}));
  CHECK_THROWS_AS(model::iac_loss(g, z, v), ad::DegenerateInput);
}

TEST_CASE("iac_loss values and scale invariance") {
  Graph<float> g;
  Var e1 = g.constant(TensorF({2}, {1, 0}));
  Var e1n = g.constant(TensorF({2}, {-1, 0}));
  Var e2 = g.constant(TensorF({2}, {0, 1}));
  CHECK(g.val(model::iac_loss(g, e1, e1)).data[0] == doctest::Approx(0.0f));
  CHECK(g.val(model::iac_loss(g, e1, e1n)).data[0] == doctest::Approx(2.0f));
  CHECK(g.val(model::iac_loss(g, e1, e2)).data[0] == doctest::Approx(1.0f));

  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    TensorF a = random_tensor({8}, 300 + trial);
    TensorF bb = random_tensor({8}, 400 + trial);
    const float alpha = rng.uniform_f(0.1f, 5.0f);
    const float beta = rng.uniform_f(0.1f, 5.0f);
    TensorF a2 = a, b2 = bb;
    for (auto& v : a2.data) v *= alpha;
    for (auto& v : b2.data) v *= beta;
    const float l1 = g.val(model::iac_loss(g, g.constant(a), g.constant(bb))).data[0];
    const float l2 = g.val(model::iac_loss(g, g.constant(a2), g.constant(b2))).data[0];
    CHECK(std::abs(l1 - l2) <= 1e-6f);
    CHECK(l1 >= 0.0f);
    CHECK(l1 <= 2.0f);
  }
}

TEST_CASE("unet_forward preserves spatial dims and is deterministic") {
  model::Model m(tiny_config(), 14, false);
  Graph<float> g;
  auto b = m.bind(g);
  const TensorF x = random_tensor({4, 16, 16}, 18, 0, 1);
  Var f1 = m.unet_forward(b, g.constant(x));
  CHECK(g.val(f1).shape == ad::Shape{8, 16, 16});
  Var f2 = m.unet_forward(b, g.constant(x));
  CHECK(g.val(f1).data == g.val(f2).data);

  CHECK_THROWS_AS(m.unet_forward(b, g.constant(TensorF({4, 12, 12}))), ad::ShapeError);
}

TEST_CASE("unet skip connections keep shallow features alive with a dead bottleneck") {
  model::Model m(tiny_config(), 15, false);
  zero_param(m, "unet.bottleneck.conv0.weight");
  zero_param(m, "unet.bottleneck.conv0.bias");
  zero_param(m, "unet.bottleneck.conv1.weight");
  zero_param(m, "unet.bottleneck.conv1.bias");
  Graph<float> g;
  auto b = m.bind(g);
  Var x = g.leaf(random_tensor({4, 16, 16}, 19, 0.1f, 0.9f), true);
  Var f = m.unet_forward(b, x);
  g.backward(g.mean(f));
  const auto& gx = g.grad(x);
  REQUIRE_FALSE(gx.empty());
  float linf = 0;
  for (float v : gx) linf = std::max(linf, std::abs(v));
  CHECK(linf > 0.0f);
}

TEST_CASE("project pools then applies the linear map") {
  model::Model m(tiny_config(), 16, false);
  Graph<float> g;
  auto b = m.bind(g);
  // Constant c per channel pools to exactly c.
  TensorF f({8, 4, 4});
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t i = 0; i < 16; ++i) f.data[c * 16 + i] = 0.125f * (c + 1);
  Var p = m.project(b, g.constant(f));
  const auto& w = m.params().value(m.param_id("proj_head.weight"));
  const auto& bias = m.params().value(m.param_id("proj_head.bias"));
  for (std::size_t r = 0; r < 16; ++r) {
    float acc = bias.data[r];
    for (std::size_t cidx = 0; cidx < 8; ++cidx)
      acc += w.data[r * 8 + cidx] * 0.125f * (cidx + 1);
    CHECK(g.val(p).data[r] == doctest::Approx(acc).epsilon(1e-5));
  }

  // Zero feature map and zero bias give the zero projection.
  model::Model mz(tiny_config(), 17);
  Graph<float> g2;
  auto b2 = mz.bind(g2);
  Var p0 = mz.project(b2, g2.constant(TensorF({8, 4, 4})));
  CHECK(g2.val(p0).data == std::vector<float>(16, 0.0f));
}

TEST_CASE("predict: zero head gives 0.5 everywhere, bias is monotone") {
  model::Model m(tiny_config(), 18);
  zero_param(m, "pred_head.weight");
  zero_param(m, "pred_head.bias");
  {
    Graph<float> g;
    auto b = m.bind(g);
    Var y = m.predict(b, g.constant(random_tensor({8, 16, 16}, 20)));
    CHECK(g.val(y).shape == ad::Shape{1, 16, 16});
    for (float v : g.val(y).data) CHECK(v == doctest::Approx(0.5f));
  }
  // Raising the bias strictly raises every output pixel.
  auto& bias = m.params().value(m.param_id("pred_head.bias"));
  const TensorF f = random_tensor({8, 16, 16}, 21);
  Graph<float> g;
  auto b = m.bind(g);
  Var y0 = m.predict(b, g.constant(f));
  bias.data[0] = 0.3f;
  Graph<float> g2;
  auto b2 = m.bind(g2);
  Var y1 = m.predict(b2, g2.constant(f));
  for (std::size_t i = 0; i < g.val(y0).numel(); ++i)
    CHECK(g2.val(y1).data[i] > g.val(y0).data[i]);
}

TEST_CASE("seg_loss: perfect prediction limit, ln2 case, bounds") {
  const std::size_t hw = 4;
  TensorF y({1, hw, hw});
  for (std::size_t i = 0; i < hw * hw / 2; ++i) y.data[i] = 1.0f;  // half foreground

  // Prediction equal to the label up to the clamp boundary.
  Graph<float> g;
  TensorF nearly = y;
  for (auto& v : nearly.data) v = v == 1.0f ? 1.0f - 1e-7f : 1e-7f;
  Var l = model::seg_loss(g, g.constant(nearly), y);
  CHECK(g.val(l).data[0] == doctest::Approx(0.0f).epsilon(1e-5));

  // Uniform 0.5 prediction: BCE is exactly ln 2.
  Var half = g.constant(TensorF::full({1, hw, hw}, 0.5f));
  Var l2 = model::seg_loss(g, half, y);
  // l_seg = l_dice + ln2; l_dice = 1 - (2*0.5*8+1)/(8+8+1) = 1 - 9/17
  const double expect = (1.0 - 9.0 / 17.0) + std::log(2.0);
  CHECK(g.val(l2).data[0] == doctest::Approx(expect).epsilon(1e-5));

  // Non-binary mask rejected.
  TensorF bad = y;
  bad.data[3] = 0.25f;
  CHECK_THROWS_AS(model::seg_loss(g, half, bad), ad::DegenerateInput);
}

TEST_CASE("seg_loss gradient matches finite differences away from clamps") {
  TensorF y({1, 4, 4});
  Rng rng(22);
  for (auto& v : y.data) v = rng.bernoulli(0.4) ? 1.0f : 0.0f;
  auto fn = [&](const TensorF& pt, std::vector<float>* grad) -> float {
    Graph<float> g;
    Var p = g.leaf(pt, true);
    Var l = model::seg_loss(g, p, y);
    if (grad) {
      g.backward(l);
      *grad = g.grad(p);
    }
    return g.val(l).data[0];
  };
  ad::GradCheckOptions opt;
  opt.eps = 1e-3;
  opt.tol = 1e-3;
  const auto rep = ad::grad_check<float>(fn, random_tensor({1, 4, 4}, 23, 0.2f, 0.8f), opt);
  CHECK(rep.pass);
}

TEST_CASE("cycle gradients reach both the fusion mlp and the image encoder") {
  model::Model m(tiny_config(), 24, /*zero_init_heads=*/false);
  const data::Dataset ds = data::generate_synthetic(1, 16, 32, 31);
  Graph<float> g;
  auto b = m.bind(g);
  aug::AugDraws draws;
  draws.spatial = aug::SpatialSpec::identity(16, 16);
  draws.views = aug::ViewDraws::identity();
  auto fwd = model::forward_train_sample(m, b, ds.samples[0], draws);
  g.backward(fwd.l_cycle);
  auto linf = [&](const char* name) {
    const auto& gr = g.grad(b.vars[m.param_id(name)]);
    float mx = 0;
    for (float v : gr) mx = std::max(mx, std::abs(v));
    return mx;
  };
  CHECK(linf("fuse.fc1.weight") > 0.0f);
  CHECK(linf("fuse.fc2.weight") > 0.0f);
  CHECK(linf("imgenc.conv0.weight") > 0.0f);
}

TEST_CASE("prediction depends only on the weak branch") {
  model::Model m(tiny_config(), 25, false);
  const data::Dataset ds = data::generate_synthetic(1, 16, 32, 32);
  aug::AugDraws base;
  base.spatial = aug::SpatialSpec::identity(16, 16);
  base.views = aug::draw_views(3, 16, 16, 51, 52);

  Graph<float> g1;
  auto b1 = m.bind(g1, false);
  auto f1 = model::forward_train_sample(m, b1, ds.samples[0], base);

  aug::AugDraws other = base;
  other.views.strong_gamma = 1.21f;  // perturb only the strong view
  other.views.strong_offset += 0.05f;
  Graph<float> g2;
  auto b2 = m.bind(g2, false);
  auto f2 = model::forward_train_sample(m, b2, ds.samples[0], other);

  CHECK(g1.val(f1.y_hat).data == g2.val(f2.y_hat).data);
  CHECK(g1.val(f1.p_s).data != g2.val(f2.p_s).data);
}

TEST_CASE("frozen raw text source receives no gradient through training loss") {
  model::Model m(tiny_config(), 26, false);
  const data::Dataset ds = data::generate_synthetic(1, 16, 32, 33);
  Graph<float> g;
  auto b = m.bind(g);
  aug::AugDraws draws;
  draws.spatial = aug::SpatialSpec::identity(16, 16);
  draws.views = aug::ViewDraws::identity();
  auto fwd = model::forward_train_sample(m, b, ds.samples[0], draws);
  ad::Var total = g.add(g.add(fwd.l_seg, fwd.l_gen), g.add(fwd.l_iac, fwd.l_cycle));
  g.backward(total);
  // Probe every node that carries the sample's raw text bytes.
  bool any_text_grad = false;
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    ad::Var v{static_cast<std::uint32_t>(id)};
    if (g.val(v).shape == ds.samples[0].text.shape &&
        g.val(v).data == ds.samples[0].text.data && g.has_grad(v))
      any_text_grad = true;
  }
  CHECK_FALSE(any_text_grad);
}

TEST_CASE("checkpoint save/load round-trips parameters and config") {
  const auto dir = std::filesystem::temp_directory_path() / "tgseg-test-ckpt";
  std::filesystem::remove_all(dir);
  model::Model m(tiny_config(), 27, false);
  model::save_checkpoint(m, dir, {{"note", "test"}});
  const model::Model back = model::load_checkpoint(dir);
  CHECK(back.config().d_raw == 32);
  CHECK(back.config().unet_width == 8);
  for (std::size_t i = 0; i < m.params().count(); ++i)
    CHECK(back.params().value(static_cast<int>(i)).data ==
          m.params().value(static_cast<int>(i)).data);
}
